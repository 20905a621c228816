#include "tendon/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tendon/metrics.hpp"
#include "tendon/rng.hpp"

namespace tendon {

void TrainHyper::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  optimizer.validate();
}

namespace {

struct Item {
  const Image* img;
  double label;
};

void check_slice(const std::string& who, const ExamRecord& exam, int index,
                 const Image& img, const ModelConfig& config) {
  if (img.h == config.input_h && img.w == config.input_w) return;
  throw std::invalid_argument(
      who + ": " + exam_id(exam) + " slice " + std::to_string(index) + " is " +
      std::to_string(img.h) + "x" + std::to_string(img.w) +
      ", model expects " + std::to_string(config.input_h) + "x" +
      std::to_string(config.input_w));
}

TensorPtr pack_batch(const std::vector<Item>& items, std::size_t i0,
                     std::size_t i1, int h, int w) {
  const int n = static_cast<int>(i1 - i0);
  auto x = make_tensor({n, 1, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = i0; i < i1; ++i)
    std::copy(items[i].img->px.begin(), items[i].img->px.end(),
              x->data.begin() + (i - i0) * hw);
  return x;
}

TensorPtr pack_labels(const std::vector<Item>& items, std::size_t i0,
                      std::size_t i1) {
  const int n = static_cast<int>(i1 - i0);
  auto y = make_tensor({n, 1});
  for (std::size_t i = i0; i < i1; ++i) y->data[i - i0] = items[i].label;
  return y;
}

// One optimization pass over `items` in fixed order; returns the mean
// per-slice loss. `classify` picks BCE-with-logits over MSE.
double run_epoch(Model& model, Optimizer& opt, const std::vector<Item>& items,
                 int batch_size, bool classify) {
  const auto& cfg = model.config();
  double total = 0.0;
  for (std::size_t i0 = 0; i0 < items.size(); i0 += batch_size) {
    const std::size_t i1 = std::min(items.size(), i0 + batch_size);
    auto x = pack_batch(items, i0, i1, cfg.input_h, cfg.input_w);
    auto y = pack_labels(items, i0, i1);
    Graph g;
    auto logits = model.forward_logits(g, x);
    auto loss = classify ? g.bce_with_logits(logits, y) : g.mse(logits, y);
    g.backward(loss);
    opt.step(model.params());
    total += loss->data[0] * static_cast<double>(i1 - i0);
  }
  return total / static_cast<double>(items.size());
}

void shuffle_items(std::vector<Item>& items, CounterRng& rng) {
  rng.shuffle(items);
}

}  // namespace

std::pair<Model, TrainRun> train_classifier(const Dataset& ds,
                                            const ModelConfig& config,
                                            const BalancingPolicy& policy,
                                            const TrainHyper& hyper) {
  config.validate();
  hyper.validate();
  if (config.head != ModelConfig::Head::Classify)
    throw std::invalid_argument("train_classifier: config head must be classify");

  std::vector<Item> healthy, injured;
  std::vector<const Image*> healthy_orig;
  for (const auto& exam : ds.exams) {
    if (exam.plane != config.plane) continue;
    const bool is_healthy = exam.timepoint == -1;
    const bool is_injured = exam.timepoint == 0 || exam.timepoint == 1;
    if (!is_healthy && !is_injured) continue;  // recovery scans: class unclear
    int index = 0;
    for (const auto& s : exam.slices) {
      check_slice("train_classifier", exam, index++, s.pixels, config);
      if (is_healthy) {
        healthy.push_back({&s.pixels, 0.0});
        healthy_orig.push_back(&s.pixels);
      } else {
        injured.push_back({&s.pixels, 1.0});
      }
    }
  }
  if (healthy.empty() && injured.empty())
    throw std::invalid_argument("train_classifier: dataset has no " +
                                plane_name(config.plane) + " slices");
  if (healthy.empty() || injured.empty())
    throw std::invalid_argument(
        "train_classifier: dataset must contain both healthy and injured "
        "slices");

  // Mirrors live here so Item pointers stay valid for the whole run.
  std::vector<Image> mirrors;
  if (policy.mirror_healthy) {
    mirrors.reserve(healthy_orig.size());
    for (const Image* img : healthy_orig) {
      mirrors.push_back(flip_horizontal(*img));
      healthy.push_back({&mirrors.back(), 0.0});
    }
  }

  Model model = build_model(config, hyper.seed);
  Optimizer opt(hyper.optimizer);

  TrainRun run;
  run.config = config;
  run.hyper = hyper;
  run.pool_healthy = healthy.size();
  run.pool_injured = injured.size();
  run.pool_total = healthy.size() + injured.size();

  for (int e = 0; e < hyper.epochs; ++e) {
    std::vector<Item> epoch;
    if (policy.subsample_per_epoch) {
      const std::size_t n = std::min(healthy.size(), injured.size());
      auto h = healthy, i = injured;
      CounterRng brng(derive_seed(policy.seed, "balance " + std::to_string(e)));
      shuffle_items(h, brng);
      shuffle_items(i, brng);
      epoch.assign(h.begin(), h.begin() + n);
      epoch.insert(epoch.end(), i.begin(), i.begin() + n);
      run.epoch_counts.emplace_back(n, n);
    } else {
      epoch = healthy;
      epoch.insert(epoch.end(), injured.begin(), injured.end());
      run.epoch_counts.emplace_back(healthy.size(), injured.size());
    }
    CounterRng srng(derive_seed(hyper.seed, "shuffle " + std::to_string(e)));
    shuffle_items(epoch, srng);
    run.loss_history.push_back(
        run_epoch(model, opt, epoch, hyper.batch_size, true));
  }
  return {std::move(model), std::move(run)};
}

std::pair<Model, TrainRun> train_regressor(const Dataset& ds,
                                           const ModelConfig& config,
                                           const TrainHyper& hyper) {
  config.validate();
  hyper.validate();
  if (config.head != ModelConfig::Head::Regress)
    throw std::invalid_argument("train_regressor: config head must be regress");

  std::vector<Item> items;
  for (const auto& exam : ds.exams) {
    if (exam.plane != config.plane) continue;
    const double truth = exam.truth.component(config.target);
    if (!std::isfinite(truth) || truth < 1.0 || truth > 7.0)
      throw std::invalid_argument("train_regressor: exam " + exam_id(exam) +
                                  " has no valid " + config.target +
                                  " ground truth");
    int index = 0;
    for (const auto& s : exam.slices) {
      check_slice("train_regressor", exam, index++, s.pixels, config);
      items.push_back({&s.pixels, truth});
    }
  }
  if (items.empty())
    throw std::invalid_argument("train_regressor: dataset has no " +
                                plane_name(config.plane) + " slices");

  Model model = build_model(config, hyper.seed);
  Optimizer opt(hyper.optimizer);

  TrainRun run;
  run.config = config;
  run.hyper = hyper;
  run.pool_total = items.size();

  for (int e = 0; e < hyper.epochs; ++e) {
    auto epoch = items;
    CounterRng srng(derive_seed(hyper.seed, "shuffle " + std::to_string(e)));
    shuffle_items(epoch, srng);
    run.loss_history.push_back(
        run_epoch(model, opt, epoch, hyper.batch_size, false));
  }
  return {std::move(model), std::move(run)};
}

std::vector<std::vector<double>> extract_features(
    const Model& model, const std::vector<const Image*>& slices,
    int batch_size) {
  if (batch_size < 1)
    throw std::invalid_argument("extract_features: batch_size must be >= 1");
  const auto& cfg = model.config();
  const std::size_t hw =
      static_cast<std::size_t>(cfg.input_h) * cfg.input_w;
  std::vector<std::vector<double>> rows;
  rows.reserve(slices.size());
  for (std::size_t i0 = 0; i0 < slices.size();
       i0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t i1 =
        std::min(slices.size(), i0 + static_cast<std::size_t>(batch_size));
    auto x = make_tensor({static_cast<int>(i1 - i0), 1, cfg.input_h,
                          cfg.input_w});
    for (std::size_t i = i0; i < i1; ++i) {
      const Image& img = *slices[i];
      if (img.h != cfg.input_h || img.w != cfg.input_w)
        throw std::invalid_argument(
            "extract_features: slice " + std::to_string(i) + " is " +
            std::to_string(img.h) + "x" + std::to_string(img.w) +
            ", model expects " + std::to_string(cfg.input_h) + "x" +
            std::to_string(cfg.input_w));
      std::copy(img.px.begin(), img.px.end(), x->data.begin() + (i - i0) * hw);
    }
    Graph g;
    auto f = model.forward_features(g, x);
    const int dim = f->shape[1];
    for (std::size_t i = i0; i < i1; ++i)
      rows.emplace_back(f->data.begin() + (i - i0) * dim,
                        f->data.begin() + (i - i0 + 1) * dim);
  }
  return rows;
}

double semisupervised_slice_score(const PcaModel& pca,
                                  const std::vector<double>& feature) {
  return pca_project(pca, feature, 0);
}

double exam_aggregate(std::vector<double> scores, double trunc_fraction) {
  if (scores.empty())
    throw std::invalid_argument("exam_aggregate: empty score list");
  if (!(trunc_fraction >= 0.0 && trunc_fraction < 0.5))
    throw std::invalid_argument(
        "exam_aggregate: trunc_fraction must be in [0, 0.5)");
  std::sort(scores.begin(), scores.end());
  const std::size_t cut =
      static_cast<std::size_t>(trunc_fraction * scores.size());
  double sum = 0.0;
  for (std::size_t i = cut; i < scores.size() - cut; ++i) sum += scores[i];
  return sum / static_cast<double>(scores.size() - 2 * cut);
}

double predict_exam(const Model& model, const ExamRecord& exam,
                    double trunc_fraction) {
  const auto& cfg = model.config();
  if (cfg.head != ModelConfig::Head::Regress)
    throw std::invalid_argument("predict_exam: model must be a regressor");
  if (exam.plane != cfg.plane)
    throw std::invalid_argument("predict_exam: exam plane " +
                                plane_name(exam.plane) +
                                " does not match model plane " +
                                plane_name(cfg.plane));
  if (exam.slices.empty())
    throw std::invalid_argument("predict_exam: exam " + exam_id(exam) +
                                " has no slices");

  std::vector<Item> items;
  int index = 0;
  for (const auto& s : exam.slices) {
    check_slice("predict_exam", exam, index++, s.pixels, cfg);
    items.push_back({&s.pixels, 0.0});
  }
  auto x = pack_batch(items, 0, items.size(), cfg.input_h, cfg.input_w);
  const double agg = exam_aggregate(model.predict_raw(x), trunc_fraction);
  return std::clamp(agg, 1.0, 7.0);
}

SemiSupResult semisupervised_exam_scores(const Model& model, const Dataset& ds,
                                         Plane plane, double trunc_fraction) {
  std::vector<const ExamRecord*> exams;
  std::vector<const Image*> slices;
  for (const auto& exam : ds.exams) {
    if (exam.plane != plane || exam.slices.empty()) continue;
    exams.push_back(&exam);
    for (const auto& s : exam.slices) slices.push_back(&s.pixels);
  }
  if (exams.size() < 3)
    throw std::invalid_argument(
        "semisupervised_exam_scores: need at least 3 " + plane_name(plane) +
        " exams, got " + std::to_string(exams.size()));

  const auto feats = extract_features(model, slices);

  SemiSupResult out;
  out.pca = pca_fit(feats, 1);

  std::vector<double> aggs, truths;
  std::size_t at = 0;
  for (const ExamRecord* exam : exams) {
    std::vector<double> scores;
    scores.reserve(exam->slices.size());
    for (std::size_t j = 0; j < exam->slices.size(); ++j)
      scores.push_back(semisupervised_slice_score(out.pca, feats[at++]));
    const double agg = exam_aggregate(std::move(scores), trunc_fraction);
    out.exam_scores.emplace_back(exam_id(*exam), agg);
    aggs.push_back(agg);
    truths.push_back(exam->truth.mean());
  }
  out.abs_correlation = std::abs(per_patient_correlation(aggs, truths).r);
  return out;
}

}  // namespace tendon
