#include "tendon/cv.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tendon/io_util.hpp"
#include "tendon/rng.hpp"

#include <charconv>

using nlohmann::json;

namespace tendon {

std::vector<std::string> FoldPlan::fold_subjects(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f == fold) out.push_back(id);
  return out;
}

FoldPlan make_folds(std::vector<std::string> subject_ids, int k,
                    std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("make_folds: k must be >= 1");
  if (subject_ids.empty())
    throw std::invalid_argument("make_folds: no subjects");
  std::sort(subject_ids.begin(), subject_ids.end());
  for (std::size_t i = 1; i < subject_ids.size(); ++i)
    if (subject_ids[i] == subject_ids[i - 1])
      throw std::invalid_argument("make_folds: duplicate subject id '" +
                                  subject_ids[i] + "'");
  if (static_cast<std::size_t>(k) > subject_ids.size())
    throw std::invalid_argument(
        "make_folds: k=" + std::to_string(k) + " exceeds the " +
        std::to_string(subject_ids.size()) + " available subjects");

  CounterRng rng(seed);
  rng.shuffle(subject_ids);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < subject_ids.size(); ++i)
    plan.assignments[subject_ids[i]] = static_cast<int>(i % k);
  return plan;
}

namespace {

// Classifier class of an exam: healthy volunteers vs fresh injuries
// (pre-op / one week post-op). Recovery scans have no class.
bool classifier_class(const ExamRecord& exam, int* label) {
  if (exam.timepoint == -1) {
    *label = 0;
    return true;
  }
  if (exam.timepoint == 0 || exam.timepoint == 1) {
    *label = 1;
    return true;
  }
  return false;
}

std::vector<double> predict_chunked(const Model& model,
                                    const std::vector<const Image*>& slices) {
  const auto& cfg = model.config();
  std::vector<double> out;
  out.reserve(slices.size());
  for (std::size_t i0 = 0; i0 < slices.size(); i0 += 64) {
    const std::size_t i1 = std::min(slices.size(), i0 + 64);
    std::vector<const Image*> chunk(slices.begin() + i0, slices.begin() + i1);
    for (double p : model.predict(pack_images(chunk, cfg.input_h, cfg.input_w)))
      out.push_back(p);
  }
  return out;
}

std::map<std::string, std::pair<double, double>> aggregate_folds(
    const std::vector<FoldMetrics>& folds) {
  std::map<std::string, std::vector<double>> by_name;
  for (const auto& f : folds)
    for (const auto& [name, v] : f.values) by_name[name].push_back(v);

  std::map<std::string, std::pair<double, double>> out;
  for (const auto& [name, vs] : by_name) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double sd = 0.0;
    if (vs.size() > 1) {
      for (double v : vs) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / static_cast<double>(vs.size() - 1));
    }
    out[name] = {mean, sd};
  }
  return out;
}

const char* optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdMomentum: return "sgd-momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "adam";
}

json options_blob(const ModelConfig& config, const CvOptions& o) {
  return json{
      {"k", o.k},
      {"fold_seed", o.fold_seed},
      {"hyper",
       {{"epochs", o.hyper.epochs},
        {"batch_size", o.hyper.batch_size},
        {"seed", o.hyper.seed},
        {"optimizer", optimizer_name(o.hyper.optimizer.kind)},
        {"lr", o.hyper.optimizer.lr}}},
      {"policy",
       {{"mirror_healthy", o.policy.mirror_healthy},
        {"subsample_per_epoch", o.policy.subsample_per_epoch},
        {"seed", o.policy.seed}}},
      {"trunc_fraction", o.trunc_fraction},
      {"crop_roi", o.crop_roi},
      {"crop_margin", o.crop_margin},
      {"pooled_correlation", o.pooled_correlation},
      {"config", json(config)}};
}

// Thresholds ride as shortest-round-trip strings because the leading ROC
// point carries +inf, which JSON numbers cannot hold.
json curve_json(const std::vector<CurvePoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts)
    arr.push_back({p.x, p.y, format_double(p.threshold)});
  return arr;
}

std::vector<CurvePoint> curve_from_json(const json& arr) {
  std::vector<CurvePoint> pts;
  for (const auto& row : arr) {
    const auto s = row.at(2).get<std::string>();
    double threshold = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), threshold);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw std::runtime_error("CVReport: bad curve threshold '" + s + "'");
    pts.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                   threshold});
  }
  return pts;
}

}  // namespace

Dataset crop_dataset(const Dataset& ds, const ChanVeseParams& params,
                     int margin, int out_h, int out_w) {
  params.validate();
  if (margin < 0)
    throw std::invalid_argument("crop_dataset: margin must be >= 0");
  Dataset out = ds;
  for (auto& exam : out.exams)
    for (auto& s : exam.slices) {
      auto [ls, mask] = segment(s.pixels, params);
      s.pixels = mask.empty() ? bilinear_resize(s.pixels, out_h, out_w)
                              : crop_roi(s.pixels, mask, margin, out_h, out_w);
    }
  return out;
}

CVReport run_cv(const Dataset& ds, const ModelConfig& config,
                const CvOptions& options) {
  config.validate();
  options.hyper.validate();
  if (!(options.trunc_fraction >= 0.0 && options.trunc_fraction < 0.5))
    throw std::invalid_argument("run_cv: trunc_fraction must be in [0, 0.5)");
  const bool classify = config.head == ModelConfig::Head::Classify;

  // Everything the task will touch: one plane, and for classification only
  // the exams that carry a class.
  Dataset scoped;
  scoped.subjects = ds.subjects;
  for (const auto& exam : ds.exams) {
    if (exam.plane != config.plane) continue;
    int label;
    if (classify && !classifier_class(exam, &label)) continue;
    scoped.exams.push_back(exam);
  }
  if (scoped.exams.empty())
    throw std::invalid_argument("run_cv: dataset has no usable " +
                                plane_name(config.plane) + " exams");

  // Label problems fail here, before any training.
  if (!classify) {
    for (const auto& exam : scoped.exams) {
      const double truth = exam.truth.component(config.target);
      if (!std::isfinite(truth) || truth < 1.0 || truth > 7.0)
        throw std::invalid_argument("run_cv: exam " + exam_id(exam) +
                                    " has no valid " + config.target +
                                    " ground truth");
    }
  }

  std::set<std::string> subject_set;
  for (const auto& exam : scoped.exams) subject_set.insert(exam.subject_id);
  FoldPlan plan =
      make_folds({subject_set.begin(), subject_set.end()}, options.k,
                 options.fold_seed);

  if (classify) {
    // every training split must keep both classes
    std::vector<std::size_t> healthy(plan.k, 0), injured(plan.k, 0);
    std::size_t total_h = 0, total_i = 0;
    for (const auto& exam : scoped.exams) {
      int label;
      classifier_class(exam, &label);
      const int f = plan.assignments.at(exam.subject_id);
      (label == 0 ? healthy[f] : injured[f])++;
      (label == 0 ? total_h : total_i)++;
    }
    if (total_h == 0 || total_i == 0)
      throw std::invalid_argument(
          "run_cv: dataset must contain both healthy and injured exams");
    for (int f = 0; f < plan.k; ++f) {
      if (total_h - healthy[f] == 0 || total_i - injured[f] == 0)
        throw std::invalid_argument(
            "run_cv: fold " + std::to_string(f) +
            " would leave a single-class training split");
    }
  }

  if (options.crop_roi)
    scoped = crop_dataset(scoped, options.chanvese, options.crop_margin,
                          config.input_h, config.input_w);

  CVReport report;
  report.task = classify ? "classify" : "regress";
  report.target = config.target;
  report.plane = config.plane;
  report.options = options_blob(config, options);
  report.folds = plan;

  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;

  for (int f = 0; f < plan.k; ++f) {
    Dataset train, test;
    train.subjects = test.subjects = scoped.subjects;
    for (const auto& exam : scoped.exams)
      (plan.assignments.at(exam.subject_id) == f ? test : train)
          .exams.push_back(exam);

    TrainHyper hyper = options.hyper;
    hyper.seed = derive_seed(options.hyper.seed, "fold " + std::to_string(f));
    BalancingPolicy policy = options.policy;
    policy.seed =
        derive_seed(options.policy.seed, "fold " + std::to_string(f));

    FoldMetrics fm;
    fm.fold = f;
    fm.test_subjects = plan.fold_subjects(f).size();
    fm.test_exams = test.exams.size();

    if (classify) {
      auto [model, run] = train_classifier(train, config, policy, hyper);
      fm.train_loss_final = run.loss_history.back();

      std::vector<const Image*> slices;
      std::vector<int> labels;
      for (const auto& exam : test.exams) {
        int label;
        classifier_class(exam, &label);
        for (const auto& s : exam.slices) {
          slices.push_back(&s.pixels);
          labels.push_back(label);
        }
      }
      fm.test_slices = slices.size();

      const auto probs = predict_chunked(model, slices);
      if (!probs.empty()) {
        const auto cm = classification_metrics(probs, labels);
        fm.values["accuracy"] = cm.accuracy;
        fm.values["precision"] = cm.precision;
        fm.values["recall"] = cm.recall;
        fm.precision_undefined = cm.precision_undefined;
        fm.recall_undefined = cm.recall_undefined;
        const bool has0 = std::count(labels.begin(), labels.end(), 0) > 0;
        const bool has1 = std::count(labels.begin(), labels.end(), 1) > 0;
        if (has0 && has1) fm.values["auc"] = roc_pr(probs, labels).auc;
        pooled_scores.insert(pooled_scores.end(), probs.begin(), probs.end());
        pooled_labels.insert(pooled_labels.end(), labels.begin(),
                             labels.end());
      }

      std::size_t at = 0;
      for (const auto& exam : test.exams) {
        int label;
        classifier_class(exam, &label);
        double mean = 0.0;
        for (std::size_t j = 0; j < exam.slices.size(); ++j)
          mean += probs[at++];
        mean /= static_cast<double>(exam.slices.size());
        report.predictions.push_back({exam_id(exam), exam.subject_id,
                                      exam.timepoint, f, mean,
                                      static_cast<double>(label)});
      }
    } else {
      auto [model, run] = train_regressor(train, config, hyper);
      fm.train_loss_final = run.loss_history.back();

      std::vector<double> preds, truths;
      for (const auto& exam : test.exams) {
        fm.test_slices += exam.slices.size();
        const double pred = predict_exam(model, exam, options.trunc_fraction);
        const double truth = exam.truth.component(config.target);
        preds.push_back(pred);
        truths.push_back(truth);
        report.predictions.push_back({exam_id(exam), exam.subject_id,
                                      exam.timepoint, f, pred, truth});
      }
      const auto rm = regression_metrics(preds, truths);
      fm.values["mae"] = rm.mae;
      fm.values["max_ae"] = rm.max_ae;

      // per-patient correlation across timepoints, Fisher-averaged
      std::map<std::string, std::vector<std::pair<int, std::size_t>>> series;
      for (std::size_t i = 0; i < test.exams.size(); ++i)
        if (test.exams[i].timepoint >= 0)
          series[test.exams[i].subject_id].emplace_back(
              test.exams[i].timepoint, i);
      std::vector<double> rs;
      for (auto& [subject, entries] : series) {
        if (entries.size() < 3) continue;
        std::sort(entries.begin(), entries.end());
        std::vector<double> p, t;
        for (auto [tp, i] : entries) {
          p.push_back(preds[i]);
          t.push_back(truths[i]);
        }
        rs.push_back(per_patient_correlation(p, t).r);
      }
      if (!rs.empty())
        fm.values["fisher_correlation"] = mean_correlation_fisher(rs);
      if (options.pooled_correlation && preds.size() >= 3)
        fm.values["pooled_correlation"] =
            per_patient_correlation(preds, truths).r;
    }

    report.fold_metrics.push_back(std::move(fm));
  }

  const bool pooled_both =
      std::count(pooled_labels.begin(), pooled_labels.end(), 0) > 0 &&
      std::count(pooled_labels.begin(), pooled_labels.end(), 1) > 0;
  if (classify && pooled_both) {
    report.curves = roc_pr(pooled_scores, pooled_labels);
    report.has_curves = true;
  }
  report.aggregate = aggregate_folds(report.fold_metrics);
  return report;
}

void to_json(json& j, const CVReport& r) {
  json folds = json::object();
  for (const auto& [id, f] : r.folds.assignments) folds[id] = f;

  json fm_arr = json::array();
  for (const auto& fm : r.fold_metrics)
    fm_arr.push_back({{"fold", fm.fold},
                      {"test_subjects", fm.test_subjects},
                      {"test_exams", fm.test_exams},
                      {"test_slices", fm.test_slices},
                      {"train_loss_final", fm.train_loss_final},
                      {"values", fm.values},
                      {"precision_undefined", fm.precision_undefined},
                      {"recall_undefined", fm.recall_undefined}});

  json pred_arr = json::array();
  for (const auto& p : r.predictions)
    pred_arr.push_back({{"exam", p.exam},
                        {"subject", p.subject},
                        {"timepoint", p.timepoint},
                        {"fold", p.fold},
                        {"predicted", p.predicted},
                        {"truth", p.truth}});

  json agg = json::object();
  for (const auto& [name, ms] : r.aggregate)
    agg[name] = {{"mean", ms.first}, {"sd", ms.second}};

  j = json{{"task", r.task},
           {"target", r.target},
           {"plane", plane_name(r.plane)},
           {"options", r.options},
           {"k", r.folds.k},
           {"fold_seed", r.folds.seed},
           {"folds", folds},
           {"fold_metrics", fm_arr},
           {"predictions", pred_arr},
           {"aggregate", agg}};
  if (r.has_curves)
    j["curves"] = {{"roc", curve_json(r.curves.roc)},
                   {"pr", curve_json(r.curves.pr)},
                   {"auc", r.curves.auc}};
  else
    j["curves"] = nullptr;
}

void from_json(const json& j, CVReport& r) {
  r = CVReport{};
  r.task = j.at("task").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.plane = plane_from_name(j.at("plane").get<std::string>());
  r.options = j.at("options");
  r.folds.k = j.at("k").get<int>();
  r.folds.seed = j.at("fold_seed").get<std::uint64_t>();
  for (const auto& [id, f] : j.at("folds").items())
    r.folds.assignments[id] = f.get<int>();

  for (const auto& row : j.at("fold_metrics")) {
    FoldMetrics fm;
    fm.fold = row.at("fold").get<int>();
    fm.test_subjects = row.at("test_subjects").get<std::size_t>();
    fm.test_exams = row.at("test_exams").get<std::size_t>();
    fm.test_slices = row.at("test_slices").get<std::size_t>();
    fm.train_loss_final = row.at("train_loss_final").get<double>();
    for (const auto& [name, v] : row.at("values").items())
      fm.values[name] = v.get<double>();
    fm.precision_undefined = row.at("precision_undefined").get<bool>();
    fm.recall_undefined = row.at("recall_undefined").get<bool>();
    r.fold_metrics.push_back(std::move(fm));
  }

  for (const auto& row : j.at("predictions"))
    r.predictions.push_back({row.at("exam").get<std::string>(),
                             row.at("subject").get<std::string>(),
                             row.at("timepoint").get<int>(),
                             row.at("fold").get<int>(),
                             row.at("predicted").get<double>(),
                             row.at("truth").get<double>()});

  if (!j.at("curves").is_null()) {
    r.curves.roc = curve_from_json(j.at("curves").at("roc"));
    r.curves.pr = curve_from_json(j.at("curves").at("pr"));
    r.curves.auc = j.at("curves").at("auc").get<double>();
    r.has_curves = true;
  }

  for (const auto& [name, ms] : j.at("aggregate").items())
    r.aggregate[name] = {ms.at("mean").get<double>(),
                         ms.at("sd").get<double>()};

  // the stored aggregate must be exactly what the fold records imply
  if (r.aggregate != aggregate_folds(r.fold_metrics))
    throw std::runtime_error(
        "CVReport: aggregate block does not match the per-fold records");
}

}  // namespace tendon
