#include "tendon/report.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tendon/io_util.hpp"

namespace fs = std::filesystem;

namespace tendon {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw std::runtime_error("short write: " + path.string());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

constexpr const char* kPlusMinus = "\xC2\xB1";  // UTF-8 for the ± sign

// Fixed-frame line plot. Tick marks carry class="xtick"/"ytick" and curves
// are <polyline> elements, so tests can assert structure by counting.
class SvgPlot {
 public:
  SvgPlot(const std::string& title, double xmin, double xmax, double ymin,
          double ymax, const std::string& xlabel, const std::string& ylabel)
      : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax) {
    body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
             "height=\"480\" viewBox=\"0 0 640 480\">\n"
          << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n"
          << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" "
             "font-family=\"sans-serif\" font-size=\"15\">"
          << title << "</text>\n"
          << "<line class=\"axis\" x1=\"60\" y1=\"424\" x2=\"616\" y2=\"424\" "
             "stroke=\"black\"/>\n"
          << "<line class=\"axis\" x1=\"60\" y1=\"40\" x2=\"60\" y2=\"424\" "
             "stroke=\"black\"/>\n"
          << "<text x=\"338\" y=\"466\" text-anchor=\"middle\" "
             "font-family=\"sans-serif\" font-size=\"13\">"
          << xlabel << "</text>\n"
          << "<text x=\"16\" y=\"232\" text-anchor=\"middle\" "
             "font-family=\"sans-serif\" font-size=\"13\" "
             "transform=\"rotate(-90 16 232)\">"
          << ylabel << "</text>\n";
  }

  double px(double x) const {
    return 60.0 + (x - xmin_) / (xmax_ - xmin_) * 556.0;
  }
  double py(double y) const {
    return 424.0 - (y - ymin_) / (ymax_ - ymin_) * 384.0;
  }

  void xticks(const std::vector<double>& ticks) {
    for (double t : ticks) {
      const double x = px(t);
      body_ << "<line class=\"xtick\" x1=\"" << format_double(x)
            << "\" y1=\"424\" x2=\"" << format_double(x)
            << "\" y2=\"430\" stroke=\"black\"/>\n"
            << "<text x=\"" << format_double(x)
            << "\" y=\"444\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"11\">"
            << format_double(t) << "</text>\n";
    }
  }

  void yticks(const std::vector<double>& ticks) {
    for (double t : ticks) {
      const double y = py(t);
      body_ << "<line class=\"ytick\" x1=\"54\" y1=\"" << format_double(y)
            << "\" x2=\"60\" y2=\"" << format_double(y)
            << "\" stroke=\"black\"/>\n"
            << "<text x=\"48\" y=\"" << format_double(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << format_double(t) << "</text>\n";
    }
  }

  void refline(double x0, double y0, double x1, double y1) {
    body_ << "<line class=\"ref\" x1=\"" << format_double(px(x0)) << "\" y1=\""
          << format_double(py(y0)) << "\" x2=\"" << format_double(px(x1))
          << "\" y2=\"" << format_double(py(y1))
          << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 4\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& stroke, bool dashed = false) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"2\"";
    if (dashed) body_ << " stroke-dasharray=\"6 4\"";
    body_ << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << ' ';
      body_ << format_double(px(pts[i].first)) << ','
            << format_double(py(pts[i].second));
    }
    body_ << "\"/>\n";
  }

  void legend(const std::vector<std::pair<std::string, std::string>>& items) {
    double y = 56.0;
    for (const auto& [label, color] : items) {
      body_ << "<line x1=\"480\" y1=\"" << format_double(y - 4)
            << "\" x2=\"508\" y2=\"" << format_double(y - 4) << "\" stroke=\""
            << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"514\" y=\"" << format_double(y)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << label
            << "</text>\n";
      y += 18.0;
    }
  }

  std::string str() const { return body_.str() + "</svg>\n"; }

 private:
  double xmin_, xmax_, ymin_, ymax_;
  std::ostringstream body_;
};

std::string curve_svg(const std::string& title,
                      const std::vector<CurvePoint>& pts,
                      const std::string& xlabel, const std::string& ylabel,
                      bool diagonal) {
  SvgPlot plot(title, 0.0, 1.0, 0.0, 1.0, xlabel, ylabel);
  plot.xticks({0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  plot.yticks({0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  if (diagonal) plot.refline(0.0, 0.0, 1.0, 1.0);
  std::vector<std::pair<double, double>> xy;
  xy.reserve(pts.size());
  for (const auto& p : pts) xy.emplace_back(p.x, p.y);
  plot.polyline(xy, "#c0392b");
  return plot.str();
}

std::string curve_csv(const std::vector<CurvePoint>& pts,
                      const std::string& xname, const std::string& yname) {
  std::ostringstream csv;
  csv << xname << ',' << yname << ",threshold\n";
  for (const auto& p : pts)
    csv << format_double(p.x) << ',' << format_double(p.y) << ','
        << format_double(p.threshold) << '\n';
  return csv.str();
}

std::string healing_curve_svg(const std::string& subject,
                              const std::string& target,
                              const std::vector<std::pair<int, double>>& pred,
                              const std::vector<std::pair<int, double>>& truth) {
  SvgPlot plot(subject + (target.empty() ? "" : " " + target), 0.0, 9.0, 1.0,
               7.0, "timepoint", "score");
  plot.xticks({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  plot.yticks({1, 2, 3, 4, 5, 6, 7});
  std::vector<std::pair<double, double>> t_xy, p_xy;
  for (auto [tp, v] : truth) t_xy.emplace_back(tp, v);
  for (auto [tp, v] : pred) p_xy.emplace_back(tp, v);
  plot.polyline(t_xy, "#7f8c8d");
  plot.polyline(p_xy, "#c0392b", true);
  plot.legend({{"ground truth", "#7f8c8d"}, {"predicted", "#c0392b"}});
  return plot.str();
}

}  // namespace

std::vector<std::string> emit_report(const CVReport& report,
                                     const std::string& outdir) {
  if (report.fold_metrics.empty() || report.predictions.empty())
    throw std::invalid_argument(
        "emit_report: report has no folds or no predictions");

  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec)
    throw std::runtime_error("cannot create report directory " + outdir +
                             ": " + ec.message());

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const fs::path path = fs::path(outdir) / name;
    write_text(path, text);
    written.push_back(path.string());
  };

  // metric column set: union over folds, alphabetical
  std::set<std::string> names;
  for (const auto& fm : report.fold_metrics)
    for (const auto& [name, v] : fm.values) names.insert(name);

  std::ostringstream csv;
  csv << "fold,test_subjects,test_exams,test_slices,train_loss_final";
  for (const auto& name : names) csv << ',' << name;
  csv << '\n';
  for (const auto& fm : report.fold_metrics) {
    csv << fm.fold << ',' << fm.test_subjects << ',' << fm.test_exams << ','
        << fm.test_slices << ',' << format_double(fm.train_loss_final);
    for (const auto& name : names) {
      csv << ',';
      auto it = fm.values.find(name);
      if (it != fm.values.end()) csv << format_double(it->second);
    }
    csv << '\n';
  }
  csv << "aggregate,,,,";
  for (const auto& name : names) {
    csv << ',';
    auto it = report.aggregate.find(name);
    if (it != report.aggregate.end())
      csv << format_double(it->second.first) << kPlusMinus
          << format_double(it->second.second);
  }
  csv << '\n';
  emit("metrics.csv", csv.str());

  std::ostringstream preds;
  preds << "exam,subject,timepoint,fold,predicted,truth\n";
  for (const auto& p : report.predictions)
    preds << p.exam << ',' << p.subject << ',' << p.timepoint << ',' << p.fold
          << ',' << format_double(p.predicted) << ',' << format_double(p.truth)
          << '\n';
  emit("predictions.csv", preds.str());

  emit("report.json", nlohmann::json(report).dump(2) + "\n");

  if (report.has_curves) {
    emit("roc.csv", curve_csv(report.curves.roc, "fpr", "tpr"));
    emit("pr.csv", curve_csv(report.curves.pr, "recall", "precision"));
    emit("roc.svg",
         curve_svg("ROC, AUC " + format_double(report.curves.auc),
                   report.curves.roc, "false positive rate",
                   "true positive rate", true));
    emit("pr.svg", curve_svg("Precision-Recall", report.curves.pr, "recall",
                             "precision", false));
  }

  if (report.task == "regress") {
    std::map<std::string, std::vector<std::pair<int, double>>> pred_by_subj;
    std::map<std::string, std::vector<std::pair<int, double>>> truth_by_subj;
    for (const auto& p : report.predictions) {
      if (p.timepoint < 0) continue;
      pred_by_subj[p.subject].emplace_back(p.timepoint, p.predicted);
      truth_by_subj[p.subject].emplace_back(p.timepoint, p.truth);
    }
    for (auto& [subject, pred] : pred_by_subj) {
      std::sort(pred.begin(), pred.end());
      auto& truth = truth_by_subj[subject];
      std::sort(truth.begin(), truth.end());
      emit("healing_curve_" + subject + ".svg",
           healing_curve_svg(subject, report.target, pred, truth));
    }
  }

  return written;
}

MetricsTable load_metrics_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 2)
    throw std::runtime_error(path + ": truncated metrics table");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 5 || header[0] != "fold")
    throw std::runtime_error(path + ": unexpected header");

  MetricsTable table;
  for (std::size_t c = 5; c < header.size(); ++c)
    table.columns.push_back(header[c]);

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(li + 1) +
                               " has " + std::to_string(cells.size()) +
                               " cells, expected " +
                               std::to_string(header.size()));
    const std::string where = path + ": row " + std::to_string(li + 1);
    if (cells[0] == "aggregate") {
      for (std::size_t c = 5; c < cells.size(); ++c) {
        if (cells[c].empty()) continue;
        const auto pm = cells[c].find(kPlusMinus);
        if (pm == std::string::npos)
          throw std::runtime_error(where + ": aggregate cell without \xC2\xB1");
        table.aggregate[header[c]] = {
            parse_double(cells[c].substr(0, pm), where),
            parse_double(cells[c].substr(pm + 2), where)};
      }
      continue;
    }
    FoldMetrics fm;
    fm.fold = static_cast<int>(parse_double(cells[0], where));
    fm.test_subjects = static_cast<std::size_t>(parse_double(cells[1], where));
    fm.test_exams = static_cast<std::size_t>(parse_double(cells[2], where));
    fm.test_slices = static_cast<std::size_t>(parse_double(cells[3], where));
    fm.train_loss_final = parse_double(cells[4], where);
    for (std::size_t c = 5; c < cells.size(); ++c)
      if (!cells[c].empty()) fm.values[header[c]] = parse_double(cells[c], where);
    table.folds.push_back(std::move(fm));
  }
  return table;
}

std::vector<PredictionRow> load_predictions_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() ||
      lines[0] != "exam,subject,timepoint,fold,predicted,truth")
    throw std::runtime_error(path + ": unexpected header");
  std::vector<PredictionRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_csv_line(lines[li]);
    const std::string where = path + ": row " + std::to_string(li + 1);
    if (cells.size() != 6)
      throw std::runtime_error(where + ": expected 6 cells");
    rows.push_back({cells[0], cells[1],
                    static_cast<int>(parse_double(cells[2], where)),
                    static_cast<int>(parse_double(cells[3], where)),
                    parse_double(cells[4], where),
                    parse_double(cells[5], where)});
  }
  return rows;
}

std::vector<CurvePoint> load_curve_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty())
    throw std::runtime_error(path + ": empty curve file");
  std::vector<CurvePoint> pts;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split_csv_line(lines[li]);
    const std::string where = path + ": row " + std::to_string(li + 1);
    if (cells.size() != 3)
      throw std::runtime_error(where + ": expected 3 cells");
    pts.push_back({parse_double(cells[0], where),
                   parse_double(cells[1], where),
                   parse_double(cells[2], where)});
  }
  return pts;
}

}  // namespace tendon
