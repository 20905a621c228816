#include "tendon/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tendon/chanvese.hpp"
#include "tendon/checkpoint.hpp"
#include "tendon/cv.hpp"
#include "tendon/dataset.hpp"
#include "tendon/healing.hpp"
#include "tendon/image.hpp"
#include "tendon/io_util.hpp"
#include "tendon/kernels.hpp"
#include "tendon/model.hpp"
#include "tendon/phantom.hpp"
#include "tendon/report.hpp"
#include "tendon/scoring.hpp"

namespace tendon {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kTargetsMsg = "SCT, TT, STE, TE, TU, TisE";

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config " + path +
                                ": top level must be a JSON object");
  return j;
}

// Unknown keys are rejected so a typo cannot silently fall back to a default.
void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void apply_phantom_params(const json& j, PhantomParams& p) {
  expect_keys(
      j,
      {"height", "width", "background", "band_period", "speckle_sigma",
       "artifact_rates", "center_jitter", "band_halfwidth_base",
       "band_halfwidth_per", "edge_width_base", "edge_width_per",
       "stripe_base", "stripe_amp", "gap_threshold_per", "gap_dim",
       "mottle_amp_per", "halo_te_depth_per", "halo_te_sigma_base",
       "halo_te_sigma_per", "halo_tise_depth_per", "halo_tise_sigma_base",
       "halo_tise_sigma_per", "ellipse_rx_base", "ellipse_rx_per",
       "ellipse_ry_base", "ellipse_ry_per"},
      "phantom params");
  maybe(j, "height", p.height);
  maybe(j, "width", p.width);
  maybe(j, "background", p.background);
  maybe(j, "band_period", p.band_period);
  maybe(j, "speckle_sigma", p.speckle_sigma);
  if (auto it = j.find("artifact_rates"); it != j.end()) {
    expect_keys(*it, {"reverberation", "shadowing", "refraction"},
                "artifact_rates");
    maybe(*it, "reverberation", p.artifact_rates.reverberation);
    maybe(*it, "shadowing", p.artifact_rates.shadowing);
    maybe(*it, "refraction", p.artifact_rates.refraction);
  }
  maybe(j, "center_jitter", p.center_jitter);
  maybe(j, "band_halfwidth_base", p.band_halfwidth_base);
  maybe(j, "band_halfwidth_per", p.band_halfwidth_per);
  maybe(j, "edge_width_base", p.edge_width_base);
  maybe(j, "edge_width_per", p.edge_width_per);
  maybe(j, "stripe_base", p.stripe_base);
  maybe(j, "stripe_amp", p.stripe_amp);
  maybe(j, "gap_threshold_per", p.gap_threshold_per);
  maybe(j, "gap_dim", p.gap_dim);
  maybe(j, "mottle_amp_per", p.mottle_amp_per);
  maybe(j, "halo_te_depth_per", p.halo_te_depth_per);
  maybe(j, "halo_te_sigma_base", p.halo_te_sigma_base);
  maybe(j, "halo_te_sigma_per", p.halo_te_sigma_per);
  maybe(j, "halo_tise_depth_per", p.halo_tise_depth_per);
  maybe(j, "halo_tise_sigma_base", p.halo_tise_sigma_base);
  maybe(j, "halo_tise_sigma_per", p.halo_tise_sigma_per);
  maybe(j, "ellipse_rx_base", p.ellipse_rx_base);
  maybe(j, "ellipse_rx_per", p.ellipse_rx_per);
  maybe(j, "ellipse_ry_base", p.ellipse_ry_base);
  maybe(j, "ellipse_ry_per", p.ellipse_ry_per);
}

void apply_chanvese(const json& j, ChanVeseParams& p) {
  expect_keys(j,
              {"mu", "nu", "lambda1", "lambda2", "epsilon", "dt", "max_iter",
               "tol"},
              "chanvese params");
  maybe(j, "mu", p.mu);
  maybe(j, "nu", p.nu);
  maybe(j, "lambda1", p.lambda1);
  maybe(j, "lambda2", p.lambda2);
  maybe(j, "epsilon", p.epsilon);
  maybe(j, "dt", p.dt);
  maybe(j, "max_iter", p.max_iter);
  maybe(j, "tol", p.tol);
}

// Blocks are [filters, kernel, pool] triples, matching the checkpoint header.
void apply_model(const json& j, ModelConfig& c) {
  expect_keys(j, {"input_h", "input_w", "conv_blocks", "feature_dim"},
              "model config");
  maybe(j, "input_h", c.input_h);
  maybe(j, "input_w", c.input_w);
  if (auto it = j.find("conv_blocks"); it != j.end()) {
    c.conv_blocks.clear();
    for (const auto& b : *it)
      c.conv_blocks.push_back(
          {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>()});
  }
  maybe(j, "feature_dim", c.feature_dim);
}

OptimizerKind optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + name +
                              "', expected sgd, momentum or adam");
}

void apply_hyper(const json& j, TrainHyper& h) {
  expect_keys(j, {"epochs", "batch_size", "seed", "optimizer"},
              "hyper config");
  maybe(j, "epochs", h.epochs);
  maybe(j, "batch_size", h.batch_size);
  maybe(j, "seed", h.seed);
  if (auto it = j.find("optimizer"); it != j.end()) {
    expect_keys(*it, {"kind", "lr", "momentum", "beta1", "beta2", "eps"},
                "optimizer config");
    if (auto k = it->find("kind"); k != it->end())
      h.optimizer.kind = optimizer_kind(k->get<std::string>());
    maybe(*it, "lr", h.optimizer.lr);
    maybe(*it, "momentum", h.optimizer.momentum);
    maybe(*it, "beta1", h.optimizer.beta1);
    maybe(*it, "beta2", h.optimizer.beta2);
    maybe(*it, "eps", h.optimizer.eps);
  }
}

void apply_policy(const json& j, BalancingPolicy& p) {
  expect_keys(j, {"mirror_healthy", "subsample_per_epoch", "seed"},
              "policy config");
  maybe(j, "mirror_healthy", p.mirror_healthy);
  maybe(j, "subsample_per_epoch", p.subsample_per_epoch);
  maybe(j, "seed", p.seed);
}

fs::path ensure_outdir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + out + ": " +
                             ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

// Flags shared by every subcommand. --seed and --config are applied by each
// command's callback; flags win over config-file values.
struct Common {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out = ".";
  int workers = 0;
};

void add_common(CLI::App* cmd, Common& c, const char* seed_doc,
                bool out_required = false) {
  cmd->add_option("--seed", c.seed, seed_doc)->capture_default_str();
  cmd->add_option("--config", c.config_path,
                  "JSON override file; explicit flags win over file values");
  auto* out = cmd->add_option("--out", c.out,
                              "Output directory, created if missing");
  if (out_required)
    out->required();
  else
    out->capture_default_str();
  cmd->add_option("--workers", c.workers,
                  "Worker threads for the compute kernels (0 = runtime "
                  "default); results do not depend on it")
      ->capture_default_str();
}

json common_config(const Common& c, std::initializer_list<const char*> keys,
                   const char* where) {
  if (c.config_path.empty()) return json::object();
  json j = load_config(c.config_path);
  expect_keys(j, keys, std::string(where) + " config");
  return j;
}

std::vector<Plane> parse_planes(const std::string& csv) {
  std::vector<Plane> planes;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) planes.push_back(plane_from_name(tok));
  if (planes.empty())
    throw std::invalid_argument("--planes needs at least one plane name");
  return planes;
}

json training_json(const TrainRun& run) {
  json epochs = json::array();
  for (const auto& [h, i] : run.epoch_counts) epochs.push_back({h, i});
  json cfg;
  to_json(cfg, run.config);
  return json{{"model", cfg},
              {"epochs", run.hyper.epochs},
              {"batch_size", run.hyper.batch_size},
              {"pool_healthy", run.pool_healthy},
              {"pool_injured", run.pool_injured},
              {"pool_total", run.pool_total},
              {"loss_history", run.loss_history},
              {"epoch_counts", epochs}};
}

// Class label used for score listings: healthy exams 0, early post-op exams
// (timepoints 0 and 1) 1; later timepoints have no binary label.
std::string class_truth(const ExamRecord& exam) {
  if (exam.timepoint < 0) return "0";
  if (exam.timepoint <= 1) return "1";
  return "";
}

struct GenerateArgs {
  Common c;
  int patients = 0;
  int healthy = 0;
  int slices = 0;
  std::string planes;
};

struct SegmentArgs {
  Common c;
  std::string input;
  std::string init = "centered";
};

struct TrainArgs {
  Common c;
  std::string data;
  std::string plane = "sagittal";
  std::string preset = "small";
  std::string target;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
};

struct ScoreArgs {
  Common c;
  std::string model_path;
  std::string data;
  std::string subject;
  int timepoint = 0;
  double trunc = 0.1;
};

struct CvArgs {
  Common c;
  std::string task;
  std::string data;
  std::string plane = "sagittal";
  std::string preset = "small";
  std::string target;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
  int k = 5;
  std::uint64_t fold_seed = 0;
  bool crop = false;
  int crop_margin = 8;
  double trunc = 0.1;
  bool pooled = false;
};

struct ReportArgs {
  Common c;
  std::string input;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "Dataset directory (manifest.json root)")
      ->required();
  cmd->add_option("--plane", a.plane, "Scan plane to train on")
      ->check(CLI::IsMember({"sagittal", "axial"}))
      ->capture_default_str();
  cmd->add_option("--preset", a.preset, "Model size preset")
      ->check(CLI::IsMember({"small", "medium", "large"}))
      ->capture_default_str();
  cmd->add_option("--epochs", a.epochs, "Training epochs (default 30)");
  cmd->add_option("--batch", a.batch, "Batch size (default 16)");
  cmd->add_option("--lr", a.lr, "Learning rate (default 1e-3 Adam)");
}

ModelConfig assemble_model(const json& cfg, const std::string& preset,
                           ModelConfig::Head head, const std::string& plane,
                           const std::string& target) {
  ModelConfig config = preset_config(preset);
  if (auto it = cfg.find("model"); it != cfg.end()) apply_model(*it, config);
  config.head = head;
  config.plane = plane_from_name(plane);
  config.target = target;
  config.validate();
  return config;
}

TrainHyper assemble_hyper(const json& cfg, const CLI::App* cmd,
                          const Common& c, int epochs, int batch, double lr) {
  TrainHyper hyper;
  if (auto it = cfg.find("hyper"); it != cfg.end()) apply_hyper(*it, hyper);
  if (cmd->count("--epochs")) hyper.epochs = epochs;
  if (cmd->count("--batch")) hyper.batch_size = batch;
  if (cmd->count("--lr")) hyper.optimizer.lr = lr;
  if (cmd->count("--seed")) hyper.seed = c.seed;
  return hyper;
}

void run_generate(const CLI::App* cmd, const GenerateArgs& a) {
  set_workers(a.c.workers);
  json cfg = common_config(a.c,
                           {"n_patients", "n_healthy", "slices_per_exam",
                            "planes", "master_seed", "params"},
                           "phantom generate");
  GenerateConfig gen;
  maybe(cfg, "n_patients", gen.n_patients);
  maybe(cfg, "n_healthy", gen.n_healthy);
  maybe(cfg, "slices_per_exam", gen.slices_per_exam);
  maybe(cfg, "master_seed", gen.master_seed);
  if (auto it = cfg.find("planes"); it != cfg.end()) {
    gen.planes.clear();
    for (const auto& p : *it)
      gen.planes.push_back(plane_from_name(p.get<std::string>()));
  }
  if (auto it = cfg.find("params"); it != cfg.end())
    apply_phantom_params(*it, gen.params);
  if (cmd->count("--patients")) gen.n_patients = a.patients;
  if (cmd->count("--healthy")) gen.n_healthy = a.healthy;
  if (cmd->count("--slices")) gen.slices_per_exam = a.slices;
  if (cmd->count("--planes")) gen.planes = parse_planes(a.planes);
  if (cmd->count("--seed")) gen.master_seed = a.c.seed;

  Dataset ds = generate_dataset(gen, a.c.out);
  std::size_t slices = 0;
  for (const auto& e : ds.exams) slices += e.slices.size();
  std::cout << "dataset written to " << a.c.out << ": " << gen.n_patients
            << " patients, " << gen.n_healthy << " healthy, "
            << ds.exams.size() << " exams, " << slices << " slices\n";
}

void run_segment(const SegmentArgs& a) {
  set_workers(a.c.workers);
  json cfg = common_config(a.c,
                           {"mu", "nu", "lambda1", "lambda2", "epsilon", "dt",
                            "max_iter", "tol", "init"},
                           "segment");
  std::string init = a.init;
  maybe(cfg, "init", init);
  cfg.erase("init");
  ChanVeseParams params;
  apply_chanvese(cfg, params);
  LevelSetInit li;
  if (init == "centered")
    li = LevelSetInit::CenteredBox;
  else if (init == "checkerboard")
    li = LevelSetInit::Checkerboard;
  else
    throw std::invalid_argument("unknown level-set init '" + init +
                                "', expected centered or checkerboard");

  Image img = read_pgm(a.input);
  auto [ls, mask] = segment(img, params, li);

  fs::path dir = ensure_outdir(a.c.out);
  Image m = make_image(img.h, img.w, 0.0);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c)
      if (!mask.empty() && mask.at(r, c)) m.at(r, c) = 1.0;
  write_pgm(m, (dir / "mask.pgm").string());
  std::string csv = "iteration,energy\n";
  for (std::size_t i = 0; i < ls.energy_history.size(); ++i)
    csv += std::to_string(i + 1) + "," + format_double(ls.energy_history[i]) +
           "\n";
  write_text(dir / "energy.csv", csv);

  std::cout << "segmented " << a.input << ": " << ls.iterations
            << " iterations";
  if (mask.empty())
    std::cout << ", empty mask\n";
  else
    std::cout << ", roi rows [" << mask.row0 << "," << mask.row1 << ") cols ["
              << mask.col0 << "," << mask.col1 << ")\n";
  std::cout << "wrote " << (dir / "mask.pgm").string() << " and "
            << (dir / "energy.csv").string() << "\n";
}

void run_train(const CLI::App* cmd, const TrainArgs& a, bool classify) {
  set_workers(a.c.workers);
  if (!classify) {
    if (a.target.empty())
      throw std::invalid_argument(
          "train regress requires --target; valid targets: " +
          std::string(kTargetsMsg));
    param_index(a.target);
  }
  json cfg = common_config(
      a.c,
      classify
          ? std::initializer_list<const char*>{"model", "hyper", "policy"}
          : std::initializer_list<const char*>{"model", "hyper"},
      classify ? "train classify" : "train regress");
  ModelConfig config = assemble_model(
      cfg, a.preset,
      classify ? ModelConfig::Head::Classify : ModelConfig::Head::Regress,
      a.plane, classify ? "" : a.target);
  TrainHyper hyper = assemble_hyper(cfg, cmd, a.c, a.epochs, a.batch, a.lr);

  Dataset ds = load_dataset(a.data);
  Model model = build_model(config, 0);
  TrainRun run;
  json seeds{{"train", hyper.seed}};
  if (classify) {
    BalancingPolicy policy;
    if (auto it = cfg.find("policy"); it != cfg.end())
      apply_policy(*it, policy);
    if (cmd->count("--seed")) policy.seed = a.c.seed;
    seeds["balance"] = policy.seed;
    std::tie(model, run) = train_classifier(ds, config, policy, hyper);
  } else {
    std::tie(model, run) = train_regressor(ds, config, hyper);
  }

  fs::path dir = ensure_outdir(a.c.out);
  save_checkpoint(model, dir / "model.ckpt", seeds, training_json(run));
  write_text(dir / "training.json", training_json(run).dump(2) + "\n");

  std::cout << "trained " << (classify ? "classifier" : a.target + " regressor")
            << " on " << a.plane << " plane: " << hyper.epochs
            << " epochs, final loss "
            << format_double(run.loss_history.back()) << "\n";
  std::cout << "wrote " << (dir / "model.ckpt").string() << " and "
            << (dir / "training.json").string() << "\n";
}

void run_score(const CLI::App* cmd, const ScoreArgs& a) {
  set_workers(a.c.workers);
  json cfg = common_config(a.c, {"trunc_fraction"}, "score exam");
  double trunc = a.trunc;
  maybe(cfg, "trunc_fraction", trunc);
  if (cmd->count("--trunc")) trunc = a.trunc;

  Model model = load_checkpoint(a.model_path);
  const ModelConfig& config = model.config();
  Dataset ds = load_dataset(a.data);

  std::vector<const ExamRecord*> exams;
  for (const auto& e : ds.exams) {
    if (e.plane != config.plane) continue;
    if (!a.subject.empty() && e.subject_id != a.subject) continue;
    if (cmd->count("--timepoint") && e.timepoint != a.timepoint) continue;
    exams.push_back(&e);
  }
  if (exams.empty())
    throw std::invalid_argument(
        "score exam: no exams match the requested plane/subject/timepoint");
  std::sort(exams.begin(), exams.end(),
            [](const ExamRecord* x, const ExamRecord* y) {
              return std::tie(x->subject_id, x->timepoint, x->plane) <
                     std::tie(y->subject_id, y->timepoint, y->plane);
            });

  const bool classify = config.head == ModelConfig::Head::Classify;
  std::string csv = "exam,subject,timepoint,score,truth\n";
  for (const ExamRecord* e : exams) {
    double score;
    std::string truth;
    if (classify) {
      std::vector<const Image*> slices;
      for (const auto& s : e->slices) slices.push_back(&s.pixels);
      auto probs = model.predict(
          pack_images(slices, config.input_h, config.input_w));
      double sum = 0.0;
      for (double p : probs) sum += p;
      score = sum / static_cast<double>(probs.size());
      truth = class_truth(*e);
    } else {
      score = predict_exam(model, *e, trunc);
      truth = format_double(e->truth.component(config.target));
    }
    csv += exam_id(*e) + "," + e->subject_id + "," +
           std::to_string(e->timepoint) + "," + format_double(score) + "," +
           truth + "\n";
  }

  fs::path dir = ensure_outdir(a.c.out);
  write_text(dir / "exam_scores.csv", csv);
  std::cout << "wrote " << (dir / "exam_scores.csv").string() << " ("
            << exams.size() << " exams)\n";
}

void run_pca(const CLI::App* cmd, const ScoreArgs& a) {
  set_workers(a.c.workers);
  json cfg = common_config(a.c, {"trunc_fraction"}, "pca fit");
  double trunc = a.trunc;
  maybe(cfg, "trunc_fraction", trunc);
  if (cmd->count("--trunc")) trunc = a.trunc;

  Model model = load_checkpoint(a.model_path);
  Dataset ds = load_dataset(a.data);
  SemiSupResult result =
      semisupervised_exam_scores(model, ds, model.config().plane, trunc);

  fs::path dir = ensure_outdir(a.c.out);
  json pj{{"format_version", 1},
          {"mean", result.pca.mean},
          {"components", result.pca.components},
          {"explained_variance", result.pca.explained_variance},
          {"abs_correlation", result.abs_correlation}};
  write_text(dir / "pca.json", pj.dump(2) + "\n");
  std::string csv = "exam,score\n";
  for (const auto& [id, score] : result.exam_scores)
    csv += id + "," + format_double(score) + "\n";
  write_text(dir / "exam_scores.csv", csv);

  std::cout << "pca fit over " << result.exam_scores.size() << " "
            << plane_name(model.config().plane)
            << " exams: |pearson| vs mean ground truth = "
            << format_double(result.abs_correlation) << "\n";
  std::cout << "wrote " << (dir / "pca.json").string() << " and "
            << (dir / "exam_scores.csv").string() << "\n";
}

void run_cv_cmd(const CLI::App* cmd, const CvArgs& a) {
  set_workers(a.c.workers);
  if (a.task == "regress") {
    if (a.target.empty())
      throw std::invalid_argument(
          "evaluate cv --task regress requires --target; valid targets: " +
          std::string(kTargetsMsg));
    param_index(a.target);
  }
  json cfg = common_config(a.c, {"model", "hyper", "policy", "cv"},
                           "evaluate cv");
  const bool classify = a.task == "classify";
  ModelConfig config = assemble_model(
      cfg, a.preset,
      classify ? ModelConfig::Head::Classify : ModelConfig::Head::Regress,
      a.plane, classify ? "" : a.target);

  CvOptions opt;
  opt.hyper = assemble_hyper(cfg, cmd, a.c, a.epochs, a.batch, a.lr);
  if (auto it = cfg.find("policy"); it != cfg.end())
    apply_policy(*it, opt.policy);
  if (cmd->count("--seed")) opt.policy.seed = a.c.seed;
  bool cfg_fold_seed = false;
  if (auto it = cfg.find("cv"); it != cfg.end()) {
    expect_keys(*it,
                {"k", "fold_seed", "trunc_fraction", "crop_roi",
                 "crop_margin", "pooled_correlation", "chanvese"},
                "cv config");
    maybe(*it, "k", opt.k);
    cfg_fold_seed = it->contains("fold_seed");
    maybe(*it, "fold_seed", opt.fold_seed);
    maybe(*it, "trunc_fraction", opt.trunc_fraction);
    maybe(*it, "crop_roi", opt.crop_roi);
    maybe(*it, "crop_margin", opt.crop_margin);
    maybe(*it, "pooled_correlation", opt.pooled_correlation);
    if (auto cv = it->find("chanvese"); cv != it->end())
      apply_chanvese(*cv, opt.chanvese);
  }
  if (cmd->count("--k")) opt.k = a.k;
  if (cmd->count("--trunc")) opt.trunc_fraction = a.trunc;
  if (cmd->count("--crop-roi")) opt.crop_roi = true;
  if (cmd->count("--crop-margin")) opt.crop_margin = a.crop_margin;
  if (cmd->count("--pooled-correlation")) opt.pooled_correlation = true;
  // Fold assignment takes --fold-seed when given, else follows --seed.
  if (cmd->count("--fold-seed"))
    opt.fold_seed = a.fold_seed;
  else if (!cfg_fold_seed && cmd->count("--seed"))
    opt.fold_seed = a.c.seed;

  Dataset ds = load_dataset(a.data);
  CVReport report = run_cv(ds, config, opt);
  auto files = emit_report(report, a.c.out);

  std::cout << a.task << " cv on " << a.plane << " plane (k=" << opt.k
            << ", " << report.predictions.size() << " held-out exams)\n";
  for (const auto& [name, ms] : report.aggregate)
    std::cout << "  " << name << ": " << format_double(ms.first) << " (sd "
              << format_double(ms.second) << ")\n";
  std::cout << "report written to " << a.c.out << " (" << files.size()
            << " files)\n";
}

void run_report(const ReportArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw std::invalid_argument("cannot open report file " + a.input);
  CVReport report = json::parse(in).get<CVReport>();
  auto files = emit_report(report, a.c.out);
  std::cout << "report written to " << a.c.out << " (" << files.size()
            << " files)\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "Synthetic tendon-ultrasound phantoms, CNN scoring models, and "
      "cross-validated evaluation"};
  app.name("tendonscan");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenerateArgs gen;
  auto* phantom = app.add_subcommand("phantom", "Synthetic dataset tools");
  phantom->require_subcommand(1);
  auto* generate = phantom->add_subcommand(
      "generate", "Generate a phantom dataset directory");
  generate->add_option("--patients", gen.patients,
                       "Patients with a 10-timepoint healing trajectory");
  generate->add_option("--healthy", gen.healthy, "Healthy volunteers");
  generate->add_option("--slices", gen.slices, "Slices per exam");
  generate->add_option("--planes", gen.planes,
                       "Comma-separated plane list (sagittal,axial)");
  add_common(generate, gen.c, "Master seed for all generated content",
             /*out_required=*/true);
  generate->callback([&] { run_generate(generate, gen); });

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand(
      "segment", "Two-region level-set segmentation of one slice");
  segment_cmd->add_option("--input", seg.input, "Slice image (binary PGM)")
      ->required();
  segment_cmd->add_option("--init", seg.init, "Level-set initialization")
      ->check(CLI::IsMember({"centered", "checkerboard"}))
      ->capture_default_str();
  add_common(segment_cmd, seg.c,
             "Accepted for interface uniformity; segmentation is "
             "deterministic");
  segment_cmd->callback([&] { run_segment(seg); });

  TrainArgs trc, trr;
  auto* train = app.add_subcommand("train", "Train a scoring model");
  train->require_subcommand(1);
  auto* classify = train->add_subcommand(
      "classify", "Healthy vs injured slice classifier");
  add_train_flags(classify, trc);
  add_common(classify, trc.c, "Weight init, shuffling and class balancing");
  classify->callback([&] { run_train(classify, trc, true); });
  auto* regress = train->add_subcommand(
      "regress", "Per-parameter score regressor (1..7 scale)");
  add_train_flags(regress, trr);
  regress->add_option("--target", trr.target,
                      "Healing parameter to regress: SCT, TT, STE, TE, TU or "
                      "TisE");
  add_common(regress, trr.c, "Weight init and shuffling");
  regress->callback([&] { run_train(regress, trr, false); });

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Apply a trained model");
  score->require_subcommand(1);
  auto* exam = score->add_subcommand(
      "exam", "Exam-level scores from a checkpoint");
  exam->add_option("--model", sc.model_path, "Checkpoint file")->required();
  exam->add_option("--data", sc.data, "Dataset directory")->required();
  exam->add_option("--subject", sc.subject, "Only this subject");
  exam->add_option("--timepoint", sc.timepoint, "Only this timepoint");
  exam->add_option("--trunc", sc.trunc,
                   "Truncated-mean tail fraction for exam aggregation")
      ->capture_default_str();
  add_common(exam, sc.c, "Accepted for interface uniformity; scoring is "
                         "deterministic");
  exam->callback([&] { run_score(exam, sc); });

  ScoreArgs pc;
  auto* pca = app.add_subcommand("pca", "Semi-supervised scoring");
  pca->require_subcommand(1);
  auto* fit = pca->add_subcommand(
      "fit", "Fit PCA on CNN features; score exams by the first component");
  fit->add_option("--model", pc.model_path, "Checkpoint file")->required();
  fit->add_option("--data", pc.data, "Dataset directory")->required();
  fit->add_option("--trunc", pc.trunc,
                  "Truncated-mean tail fraction for exam aggregation")
      ->capture_default_str();
  add_common(fit, pc.c, "Accepted for interface uniformity; the fit is "
                        "deterministic");
  fit->callback([&] { run_pca(fit, pc); });

  CvArgs cv;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluation protocols");
  evaluate->require_subcommand(1);
  auto* cvcmd = evaluate->add_subcommand(
      "cv", "Patient-level k-fold cross-validation");
  cvcmd->add_option("--task", cv.task, "What to evaluate")
      ->check(CLI::IsMember({"classify", "regress"}))
      ->required();
  cvcmd->add_option("--data", cv.data, "Dataset directory")->required();
  cvcmd->add_option("--plane", cv.plane, "Scan plane")
      ->check(CLI::IsMember({"sagittal", "axial"}))
      ->capture_default_str();
  cvcmd->add_option("--preset", cv.preset, "Model size preset")
      ->check(CLI::IsMember({"small", "medium", "large"}))
      ->capture_default_str();
  cvcmd->add_option("--target", cv.target,
                    "Healing parameter for --task regress");
  cvcmd->add_option("--epochs", cv.epochs, "Training epochs (default 30)");
  cvcmd->add_option("--batch", cv.batch, "Batch size (default 16)");
  cvcmd->add_option("--lr", cv.lr, "Learning rate (default 1e-3 Adam)");
  cvcmd->add_option("--k", cv.k, "Number of folds")->capture_default_str();
  cvcmd->add_option("--fold-seed", cv.fold_seed,
                    "Fold assignment seed (default: --seed)");
  cvcmd->add_flag("--crop-roi", cv.crop,
                  "Segment every slice and crop to the ROI first");
  cvcmd->add_option("--crop-margin", cv.crop_margin,
                    "ROI margin in pixels for --crop-roi")
      ->capture_default_str();
  cvcmd->add_option("--trunc", cv.trunc,
                    "Truncated-mean tail fraction for exam aggregation")
      ->capture_default_str();
  cvcmd->add_flag("--pooled-correlation", cv.pooled,
                  "Also report the per-fold pooled Pearson correlation");
  add_common(cvcmd, cv.c, "Training, balancing and (by default) fold seed");
  cvcmd->callback([&] { run_cv_cmd(cvcmd, cv); });

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand(
      "report", "Re-emit tables and plots from a stored report.json");
  report_cmd->add_option("--input", rep.input, "report.json produced by "
                                               "evaluate cv")
      ->required();
  add_common(report_cmd, rep.c, "Accepted for interface uniformity; "
                                "re-emission is deterministic");
  report_cmd->callback([&] { run_report(rep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("tendonscan");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tendon
