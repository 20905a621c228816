#include "tendon/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tendon/io_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tendon {

const SubjectInfo& Dataset::subject(const std::string& id) const {
  for (const auto& s : subjects)
    if (s.id == id) return s;
  throw std::invalid_argument("unknown subject id '" + id + "'");
}

std::string exam_id(const ExamRecord& exam) {
  return exam.subject_id + "/t" + std::to_string(exam.timepoint) + "/" +
         plane_name(exam.plane);
}

namespace {

std::string score_key(const std::string& subject, int timepoint) {
  return subject + "|" + std::to_string(timepoint);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw std::runtime_error("short write: " + path.string());
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& root) {
  std::error_code ec;
  fs::create_directories(fs::path(root) / "slices", ec);
  if (ec)
    throw std::runtime_error("cannot create dataset directory " + root + ": " +
                             ec.message());

  // one ground-truth row per (subject, timepoint); planes must agree
  std::map<std::string, HealingState> rows;
  std::vector<std::string> row_order;
  for (const auto& exam : ds.exams) {
    const auto key = score_key(exam.subject_id, exam.timepoint);
    auto it = rows.find(key);
    if (it == rows.end()) {
      rows.emplace(key, exam.truth);
      row_order.push_back(key);
    } else {
      for (int i = 0; i < 6; ++i)
        if (it->second.component(i) != exam.truth.component(i))
          throw std::invalid_argument(
              "exams for subject " + exam.subject_id + " timepoint " +
              std::to_string(exam.timepoint) +
              " carry different ground-truth states");
    }
  }

  std::ostringstream csv;
  csv << "subject_id,timepoint,SCT,TT,STE,TE,TU,TisE\n";
  for (const auto& key : row_order) {
    const auto bar = key.find('|');
    const auto& st = rows.at(key);
    csv << key.substr(0, bar) << "," << key.substr(bar + 1);
    for (int i = 0; i < 6; ++i) csv << "," << format_double(st.component(i));
    csv << "\n";
  }
  write_text(fs::path(root) / "scores.csv", csv.str());

  json manifest;
  manifest["format_version"] = 1;
  manifest["subjects"] = json::array();
  for (const auto& s : ds.subjects)
    manifest["subjects"].push_back(
        {{"id", s.id}, {"kind", s.is_patient ? "patient" : "healthy"}});
  manifest["exams"] = json::array();
  for (const auto& exam : ds.exams) {
    json e;
    e["subject"] = exam.subject_id;
    e["timepoint"] = exam.timepoint;
    e["plane"] = plane_name(exam.plane);
    e["slices"] = json::array();
    for (const auto& sl : exam.slices) {
      e["slices"].push_back(sl.file);
      write_pgm(sl.pixels, (fs::path(root) / sl.file).string());
      json side;
      side["subject"] = exam.subject_id;
      side["timepoint"] = exam.timepoint;
      side["plane"] = plane_name(exam.plane);
      side["slice_index"] = sl.slice_index;
      side["seed"] = sl.seed;
      fs::path sidecar = fs::path(root) / sl.file;
      sidecar.replace_extension(".json");
      write_text(sidecar, side.dump(2) + "\n");
    }
    manifest["exams"].push_back(std::move(e));
  }
  write_text(fs::path(root) / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

double parse_score(const std::string& tok, const std::string& file, int line) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(file + ":" + std::to_string(line) +
                             ": not a number: '" + tok + "'");
  }
  if (pos != tok.size())
    throw std::runtime_error(file + ":" + std::to_string(line) +
                             ": trailing junk in '" + tok + "'");
  if (!(v >= 1.0 && v <= 7.0))
    throw std::runtime_error(file + ":" + std::to_string(line) + ": score " +
                             tok + " outside [1,7]");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& root) {
  const fs::path rootp(root);
  const std::string manifest_path = (rootp / "manifest.json").string();
  const std::string scores_path = (rootp / "scores.csv").string();

  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error("missing manifest: " + manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(manifest_path + ": " + e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != 1)
    throw std::runtime_error(manifest_path +
                             ": unsupported or missing format_version "
                             "(this reader understands version 1)");

  // ground truth, keyed by (subject, timepoint)
  std::ifstream sf(scores_path, std::ios::binary);
  if (!sf) throw std::runtime_error("missing scores table: " + scores_path);
  std::map<std::string, HealingState> truth;
  std::string line;
  int line_no = 0;
  while (std::getline(sf, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "subject_id,timepoint,SCT,TT,STE,TE,TU,TisE")
        throw std::runtime_error(scores_path + ":1: unexpected header '" +
                                 line + "'");
      continue;
    }
    auto tok = split_csv(line);
    if (tok.size() != 8)
      throw std::runtime_error(scores_path + ":" + std::to_string(line_no) +
                               ": expected 8 fields, got " +
                               std::to_string(tok.size()));
    int tp;
    try {
      tp = std::stoi(tok[1]);
    } catch (const std::exception&) {
      throw std::runtime_error(scores_path + ":" + std::to_string(line_no) +
                               ": bad timepoint '" + tok[1] + "'");
    }
    HealingState st;
    for (int i = 0; i < 6; ++i)
      st.component(i) = parse_score(tok[2 + i], scores_path, line_no);
    auto key = score_key(tok[0], tp);
    if (!truth.emplace(key, st).second)
      throw std::runtime_error(scores_path + ":" + std::to_string(line_no) +
                               ": duplicate (subject, timepoint) row " +
                               tok[0] + "," + tok[1]);
  }

  Dataset ds;
  std::set<std::string> subject_ids;
  for (const auto& s : manifest["subjects"]) {
    SubjectInfo info;
    info.id = s.at("id").get<std::string>();
    const auto kind = s.at("kind").get<std::string>();
    if (kind != "patient" && kind != "healthy")
      throw std::runtime_error(manifest_path + ": subject " + info.id +
                               " has unknown kind '" + kind + "'");
    info.is_patient = kind == "patient";
    if (!subject_ids.insert(info.id).second)
      throw std::runtime_error(manifest_path + ": duplicate subject id " +
                               info.id);
    ds.subjects.push_back(std::move(info));
  }

  for (const auto& e : manifest["exams"]) {
    ExamRecord exam;
    exam.subject_id = e.at("subject").get<std::string>();
    exam.timepoint = e.at("timepoint").get<int>();
    exam.plane = plane_from_name(e.at("plane").get<std::string>());
    if (!subject_ids.count(exam.subject_id))
      throw std::runtime_error(manifest_path + ": exam references unknown " +
                               "subject " + exam.subject_id);
    const auto key = score_key(exam.subject_id, exam.timepoint);
    auto it = truth.find(key);
    if (it == truth.end())
      throw std::runtime_error(manifest_path + ": no ground-truth row for " +
                               exam.subject_id + " timepoint " +
                               std::to_string(exam.timepoint) + " in " +
                               scores_path);
    exam.truth = it->second;
    for (const auto& slice_file : e.at("slices")) {
      SliceRef sl;
      sl.file = slice_file.get<std::string>();
      const fs::path pgm = rootp / sl.file;
      if (!fs::exists(pgm))
        throw std::runtime_error(manifest_path +
                                 ": referenced slice file missing: " +
                                 pgm.string());
      sl.pixels = read_pgm(pgm.string());
      fs::path sidecar = pgm;
      sidecar.replace_extension(".json");
      std::ifstream scf(sidecar, std::ios::binary);
      if (!scf)
        throw std::runtime_error("missing slice sidecar: " + sidecar.string());
      json side;
      try {
        scf >> side;
      } catch (const json::parse_error& err) {
        throw std::runtime_error(sidecar.string() + ": " + err.what());
      }
      sl.slice_index = side.at("slice_index").get<int>();
      sl.seed = side.at("seed").get<std::uint64_t>();
      exam.slices.push_back(std::move(sl));
    }
    ds.exams.push_back(std::move(exam));
  }

  // structural invariants: patients carry the full 0..9 series per plane
  // they appear in; healthy subjects have exactly one all-ones exam per
  // plane they appear in
  for (const auto& s : ds.subjects) {
    std::map<Plane, std::set<int>> tps;
    for (const auto& exam : ds.exams)
      if (exam.subject_id == s.id) tps[exam.plane].insert(exam.timepoint);
    if (s.is_patient) {
      for (const auto& [plane, set] : tps) {
        if (set.size() != 10 || *set.begin() != 0 || *set.rbegin() != 9)
          throw std::runtime_error("subject " + s.id + " (" +
                                   plane_name(plane) +
                                   ") does not cover timepoints 0..9");
      }
    } else {
      for (const auto& [plane, set] : tps) {
        if (set.size() != 1 || *set.begin() != -1)
          throw std::runtime_error("healthy subject " + s.id + " (" +
                                   plane_name(plane) +
                                   ") must have exactly one timepoint -1 exam");
      }
      const auto it = truth.find(score_key(s.id, -1));
      if (it != truth.end())
        for (int i = 0; i < 6; ++i)
          if (it->second.component(i) != 1.0)
            throw std::runtime_error("healthy subject " + s.id +
                                     " has a non-healthy ground-truth row");
    }
  }
  return ds;
}

}  // namespace tendon
