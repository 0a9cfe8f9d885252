#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgray/container.hpp"
#include "advgray/errors.hpp"
#include "advgray/mnist.hpp"
#include "advgray/model.hpp"
#include "advgray/rng.hpp"
#include "advgray/zoo.hpp"

namespace advgray {

struct TrainConfig {
  double learning_rate = 0.01;
  double lr_decay_factor = 1.0;
  double lr_floor = 0.01;
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  std::size_t plateau_patience = 3;
  double plateau_delta = 0.0005;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (lr_floor > learning_rate)
      throw ConfigError("lr_floor must not exceed learning_rate");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

// Constant 0.01 for the feed-forward models.
inline TrainConfig default_fnn_config() { return TrainConfig{}; }

// Convolutional models anneal from 1e-3 down to 1e-7 on holdout plateaus.
inline TrainConfig default_cnn_config() {
  TrainConfig c;
  c.learning_rate = 0.001;
  c.lr_decay_factor = 0.1;
  c.lr_floor = 1e-7;
  c.max_epochs = 50;
  return c;
}

inline TrainConfig default_config_for(const std::string& arch_id) {
  return arch_id.rfind("cnn", 0) == 0 ? default_cnn_config()
                                      : default_fnn_config();
}

struct EpochStats {
  double loss = 0.0;
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_learning_rate = 0.0;
  bool stopped_on_plateau = false;
};

// Argmax ties resolve to the lowest class index.
inline std::size_t argmax_row(const double* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

inline std::size_t count_correct(const Tensor& logits,
                                 std::span<const std::uint8_t> labels) {
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  std::size_t n = 0;
  for (std::size_t i = 0; i < b; ++i)
    if (argmax_row(logits.data() + i * k, k) == labels[i]) ++n;
  return n;
}

// Mean accuracy over the dataset. Work proceeds in fixed-size shards whose
// correct-prediction counts merge as exact integers, so any partitioning
// yields the same result.
inline double evaluate(const Model& m, const Dataset& data,
                       std::size_t shard = 256) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < data.size(); b += shard) {
    const std::size_t e = std::min(data.size(), b + shard);
    Tensor batch = adapt_batch(m, slice_batch(data.images, b, e));
    BatchActivations acts = model_forward(m, batch);
    correct += count_correct(
        acts.logits, std::span(data.labels).subspan(b, e - b));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Mini-batch SGD with per-epoch seeded shuffles. The holdout accuracy
// drives the schedule: when it improves by less than plateau_delta for
// plateau_patience consecutive epochs the rate decays by lr_decay_factor,
// and once the rate sits at lr_floor a persisting plateau stops training.
inline TrainReport train(Model& m, const Dataset& train_set,
                         const Dataset& holdout, const TrainConfig& cfg) {
  cfg.validate();
  TrainReport report;
  double lr = cfg.learning_rate;
  double best_acc = -1.0;
  std::size_t stall = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t c = train_set.images.dim(1), h = train_set.images.dim(2),
                    w = train_set.images.dim(3);
  const std::size_t px = c * h * w;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, epoch + 1));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const std::size_t bs = e - b;
      Tensor batch({bs, c, h, w});
      std::vector<std::uint8_t> labels(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t src = order[b + i];
        std::memcpy(batch.data() + i * px, train_set.images.data() + src * px,
                    px * sizeof(double));
        labels[i] = train_set.labels[src];
      }
      BatchActivations acts = model_forward(m, adapt_batch(m, batch));
      BackwardResult back = model_backward(m, acts, labels);
      if (!std::isfinite(back.loss)) {
        throw DivergenceError("loss diverged at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(b / cfg.batch_size));
      }
      correct += count_correct(acts.logits, labels);
      loss_sum += back.loss * static_cast<double>(bs);

      std::size_t gi = 0;
      for_each_parameter(m, [&](Tensor& p) {
        const Tensor& g = back.param_grads[gi++];
        double* pp = p.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < p.size(); ++i) pp[i] -= lr * pg[i];
      });
    }

    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(order.size());
    stats.holdout_accuracy = evaluate(m, holdout);
    stats.learning_rate = lr;
    report.epochs.push_back(stats);

    if (stats.holdout_accuracy - best_acc < cfg.plateau_delta) {
      ++stall;
    } else {
      stall = 0;
    }
    best_acc = std::max(best_acc, stats.holdout_accuracy);
    if (stall >= cfg.plateau_patience) {
      if (lr > cfg.lr_floor) {
        lr = std::max(cfg.lr_floor, lr * cfg.lr_decay_factor);
        stall = 0;
      } else {
        report.stopped_on_plateau = true;
        break;
      }
    }
  }
  report.final_learning_rate = lr;
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoint: the shared container with a canonical JSON model spec header
// followed by the parameter tensors.

namespace detail {

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2: return "maxpool2";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

inline LayerKind layer_kind_from(const std::string& s) {
  if (s == "dense") return LayerKind::Dense;
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "maxpool2") return LayerKind::MaxPool2;
  if (s == "flatten") return LayerKind::Flatten;
  throw DataError("checkpoint: unknown layer kind '" + s + "'");
}

}  // namespace detail

inline nlohmann::json spec_to_json(const ModelSpec& spec,
                                   std::uint64_t seed) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json jl;
    jl["kind"] = detail::layer_kind_name(l.kind);
    if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv) {
      jl["in"] = l.in;
      jl["out"] = l.out;
    }
    layers.push_back(jl);
  }
  return nlohmann::json{{"arch_id", spec.arch_id},
                        {"input_shape", spec.input_shape},
                        {"layers", layers},
                        {"seed", seed}};
}

inline std::pair<ModelSpec, std::uint64_t> spec_from_json(
    const nlohmann::json& j) {
  ModelSpec spec;
  spec.arch_id = j.at("arch_id").get<std::string>();
  spec.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
  for (const auto& jl : j.at("layers")) {
    LayerSpec ls;
    ls.kind = detail::layer_kind_from(jl.at("kind").get<std::string>());
    if (ls.kind == LayerKind::Dense || ls.kind == LayerKind::Conv) {
      ls.in = jl.at("in").get<std::size_t>();
      ls.out = jl.at("out").get<std::size_t>();
    }
    spec.layers.push_back(ls);
  }
  return {spec, j.at("seed").get<std::uint64_t>()};
}

inline void write_checkpoint_stream(std::ostream& os, const Model& m) {
  detail::write_container_header(os, spec_to_json(m.spec, m.seed).dump());
  std::uint32_t n_tensors = 0;
  for_each_parameter(m, [&](const Tensor&) { ++n_tensors; });
  detail::write_le<std::uint32_t>(os, n_tensors);
  for_each_parameter(m, [&](const Tensor& t) {
    detail::write_tensor_block(os, t);
  });
}

inline Model read_checkpoint_stream(std::istream& is) {
  const std::string js = detail::read_container_header(is);
  auto [spec, seed] = spec_from_json(nlohmann::json::parse(js));

  Model m = instantiate(spec, seed);
  const auto n_tensors = detail::read_le<std::uint32_t>(is);
  std::vector<Tensor> tensors;
  tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i)
    tensors.push_back(detail::read_tensor_block(is));
  std::size_t idx = 0;
  for_each_parameter(m, [&](Tensor& p) {
    if (idx >= tensors.size())
      throw DataError("checkpoint: too few tensors for spec");
    if (tensors[idx].shape() != p.shape())
      throw DataError("checkpoint: tensor " + std::to_string(idx) +
                      " has shape " + shape_string(tensors[idx]) +
                      ", spec wants " + shape_string(p));
    p = std::move(tensors[idx++]);
  });
  if (idx != tensors.size())
    throw DataError("checkpoint: extra tensors beyond spec");
  return m;
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  write_checkpoint_stream(f, m);
  if (!f) throw DataError("failed writing " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint_stream(f);
}

inline void write_train_report_csv(const TrainReport& r,
                                   const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "epoch,loss,train_acc,holdout_acc,lr\n";
  char buf[256];
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const auto& e = r.epochs[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i, e.loss,
                  e.train_accuracy, e.holdout_accuracy, e.learning_rate);
    f << buf;
  }
}

}  // namespace advgray
