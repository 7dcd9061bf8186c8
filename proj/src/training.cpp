#include "rfsnn/training.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

namespace rfsnn {

// ---- Adam -------------------------------------------------------------------

template <std::floating_point T>
void adam_step(std::span<BasicParameter<T>* const> params, AdamState<T>& state) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size())
    throw ConfigError("adam_step: optimizer state holds " +
                      std::to_string(state.m.size()) + " moments for " +
                      std::to_string(params.size()) + " parameters");
  const std::uint64_t next_t = state.t + 1;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->grad.shape() != state.m[k].shape())
      throw ConfigError("adam_step: moment shape mismatch for " + params[k]->name);
    for (std::size_t i = 0; i < params[k]->grad.size(); ++i) {
      if (!std::isfinite(params[k]->grad[i]))
        throw NumericError("adam_step: non-finite gradient at step " +
                           std::to_string(next_t) + " in parameter '" +
                           params[k]->name + "' (element " + std::to_string(i) +
                           ")");
    }
  }
  state.t = next_t;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      const double m_hat = static_cast<double>(m[i]) / bc1;
      const double v_hat = static_cast<double>(v[i]) / bc2;
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                  c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

// ---- evaluation ---------------------------------------------------------------

namespace {

double cross_entropy(std::span<const double> z, std::size_t label) {
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  double denom = 0;
  for (double v : z) denom += std::exp(v - zmax);
  return std::log(denom) - (z[label] - zmax);
}

std::size_t argmax(std::span<const double> z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return best;
}

// Runs fn(i) for i in [0, n) over `lanes` threads, lane l taking i = l mod lanes.
template <class F>
void parallel_for(std::size_t n, std::size_t lanes, F&& fn) {
  lanes = std::max<std::size_t>(1, std::min(lanes, n));
  if (lanes == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(lanes);
  {
    std::vector<std::jthread> workers;
    for (std::size_t l = 0; l < lanes; ++l)
      workers.emplace_back([&, l] {
        try {
          for (std::size_t i = l; i < n; i += lanes) fn(i);
        } catch (...) {
          errors[l] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

EvalResult evaluate_predictions(
    const std::function<std::vector<double>(std::size_t)>& logits_for,
    std::span<const std::uint8_t> labels) {
  EvalResult r;
  r.samples = labels.size();
  if (labels.empty()) return r;
  std::size_t correct = 0;
  double loss = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto z = logits_for(i);
    if (argmax(z) == labels[i]) ++correct;
    loss += cross_entropy(z, labels[i]);
  }
  r.accuracy_percent = 100.0 * static_cast<double>(correct) /
                       static_cast<double>(labels.size());
  r.mean_loss = loss / static_cast<double>(labels.size());
  return r;
}

template <std::floating_point T>
EvalResult evaluate(Network<T>& net, const Dataset& data, std::size_t threads) {
  std::vector<std::vector<double>> logits(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto z = net.logits(data.image<T>(i));
    logits[i].assign(z.data().begin(), z.data().end());
  });
  return evaluate_predictions([&](std::size_t i) { return logits[i]; },
                              data.labels);
}

// ---- curves -------------------------------------------------------------------

std::string curves_to_csv(std::span<const EpochMetrics> metrics) {
  std::string out = "epoch,split,accuracy_percent,mean_loss\n";
  for (const auto& m : metrics)
    out += fmt::format("{},{},{},{}\n", m.epoch, m.split, m.accuracy_percent,
                       m.mean_loss);
  return out;
}

void export_curves(std::span<const EpochMetrics> metrics,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << curves_to_csv(metrics);
  out.flush();
}

std::vector<EpochMetrics> parse_curves(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,split,accuracy_percent,mean_loss")
    throw FormatError("metrics csv: missing or unexpected header");
  std::vector<EpochMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[4];
    for (int i = 0; i < 4; ++i)
      if (!std::getline(row, f[i], ','))
        throw FormatError("metrics csv: short row \"" + line + "\"");
    EpochMetrics m;
    try {
      m.epoch = std::stoul(f[0]);
      m.split = f[1];
      m.accuracy_percent = std::stod(f[2]);
      m.mean_loss = std::stod(f[3]);
    } catch (const std::exception&) {
      throw FormatError("metrics csv: malformed row \"" + line + "\"");
    }
    if (m.split != "train" && m.split != "test")
      throw FormatError("metrics csv: unknown split \"" + m.split + "\"");
    out.push_back(m);
  }
  return out;
}

// ---- trainer ------------------------------------------------------------------

namespace {

NetworkConfig with_seed(NetworkConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

}  // namespace

template <std::floating_point T>
Trainer<T>::Trainer(NetworkConfig net_cfg, TrainConfig cfg)
    : cfg_(std::move(cfg)),
      net_(with_seed(std::move(net_cfg), cfg_.seed)),
      shuffle_seed_(derive_seed(cfg_.seed, "shuffle")) {
  cfg_.validate();
  adam_.config.lr = cfg_.lr;
}

template <std::floating_point T>
void Trainer<T>::compute_gradients(const Dataset& data,
                                   std::span<const std::size_t> indices,
                                   std::vector<double>* losses) {
  std::vector<std::unique_ptr<BasicTape<T>>> tapes(indices.size());
  std::vector<double> sample_loss(indices.size());
  parallel_for(indices.size(), cfg_.threads, [&](std::size_t s) {
    auto tape = std::make_unique<BasicTape<T>>();
    const std::size_t idx = indices[s];
    Var logits = net_.forward(*tape, tape->constant(data.image<T>(idx)), true);
    Var loss = softmax_cross_entropy(*tape, logits, data.labels[idx]);
    sample_loss[s] = tape->value(loss)[0];
    tape->backward(loss);
    tapes[s] = std::move(tape);
  });
  // Serialized reduction in sample order keeps results independent of the
  // lane count.
  net_.zero_grad();
  for (auto& tape : tapes) tape->accumulate_parameter_grads();
  const T inv = T{1} / static_cast<T>(indices.size());
  for (auto* p : net_.parameters())
    for (auto& g : p->grad.data()) g *= inv;
  if (losses) *losses = std::move(sample_loss);
}

template <std::floating_point T>
double Trainer<T>::batch_loss(const Dataset& data,
                              std::span<const std::size_t> indices) {
  double total = 0;
  for (std::size_t idx : indices) {
    BasicTape<T> tape;
    Var logits = net_.forward(tape, tape.constant(data.image<T>(idx)), false);
    total += tape.value(softmax_cross_entropy(tape, logits, data.labels[idx]))[0];
  }
  return total / static_cast<double>(indices.size());
}

template <std::floating_point T>
std::optional<double> Trainer<T>::step(const Dataset& train) {
  BatchIterator it(train.size(), cfg_.batch_size, shuffle_seed_, epoch_);
  it.seek(cursor_);
  auto batch = it.next();
  if (!batch) return std::nullopt;

  if (!net_.calibrated()) {
    std::vector<BasicTensor<T>> images;
    for (std::size_t idx : *batch) images.push_back(train.image<T>(idx));
    net_.calibrate(images);
  }

  std::vector<double> losses;
  compute_gradients(train, *batch, &losses);
  double mean = 0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(losses.size());
  if (!std::isfinite(mean))
    throw NumericError("train: non-finite loss at step " +
                       std::to_string(step_ + 1));
  auto params = net_.parameters();
  adam_step<T>(params, adam_);
  cursor_ = it.position();
  ++step_;
  return mean;
}

template <std::floating_point T>
void Trainer<T>::next_epoch() {
  ++epoch_;
  cursor_ = 0;
}

template <std::floating_point T>
std::vector<EpochMetrics> Trainer<T>::fit(
    const Dataset& train, const Dataset& test,
    const std::function<void(const EpochMetrics&)>& on_metrics) {
  auto emit = [&](EpochMetrics m) {
    history_.push_back(m);
    if (on_metrics) on_metrics(m);
  };
  while (epoch_ < cfg_.epochs) {
    while (step(train)) {
    }
    const std::size_t done = epoch_ + 1;
    if (cfg_.eval_train) {
      const EvalResult r = evaluate(net_, train, cfg_.threads);
      emit({done, "train", r.accuracy_percent, r.mean_loss});
    }
    const EvalResult r = evaluate(net_, test, cfg_.threads);
    emit({done, "test", r.accuracy_percent, r.mean_loss});
    next_epoch();
    if (!cfg_.metrics_path.empty()) export_curves(history_, cfg_.metrics_path);
    if (r.accuracy_percent > best_test_accuracy_) {
      best_test_accuracy_ = r.accuracy_percent;
      if (!cfg_.checkpoint_path.empty())
        save_checkpoint(cfg_.checkpoint_path, checkpoint());
    }
  }
  return history_;
}

template <std::floating_point T>
Checkpoint Trainer<T>::checkpoint() const {
  auto& self = const_cast<Trainer&>(*this);
  Checkpoint ck;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& m : history_)
    history.push_back({{"epoch", m.epoch},
                       {"split", m.split},
                       {"accuracy_percent", m.accuracy_percent},
                       {"mean_loss", m.mean_loss}});
  ck.config = {
      {"network", to_json(net_.config())},
      {"train", to_json(cfg_)},
      {"state",
       {{"epoch", epoch_},
        {"cursor", cursor_},
        {"step", step_},
        {"calibrated", net_.calibrated()},
        {"shuffle_seed", shuffle_seed_},
        {"best_test_accuracy", best_test_accuracy_},
        {"history", std::move(history)},
        {"adam",
         {{"t", adam_.t},
          {"lr", adam_.config.lr},
          {"beta1", adam_.config.beta1},
          {"beta2", adam_.config.beta2},
          {"eps", adam_.config.eps}}}}},
  };
  auto params = self.net_.parameters();
  for (auto* p : params) ck.tensors.push_back({p->name, p->value.template cast<float>()});
  for (std::size_t k = 0; k < adam_.m.size(); ++k) {
    ck.tensors.push_back({"adam.m:" + params[k]->name, adam_.m[k].template cast<float>()});
    ck.tensors.push_back({"adam.v:" + params[k]->name, adam_.v[k].template cast<float>()});
  }
  return ck;
}

namespace {

template <std::floating_point T>
void load_parameters(Network<T>& net, const Checkpoint& ck) {
  for (auto* p : net.parameters()) {
    const Tensor* t = ck.find(p->name);
    if (!t) throw FormatError("checkpoint: missing tensor " + p->name);
    if (t->shape() != p->value.shape())
      throw FormatError("checkpoint: tensor " + p->name + " has shape " +
                        shape_to_string(t->shape()) + ", network expects " +
                        shape_to_string(p->value.shape()));
    p->value = t->template cast<T>();
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError(std::string("checkpoint: config blob lacks \"") + key + "\"");
  return j.at(key);
}

template <class F>
auto format_guard(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid stored config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid stored config: ") + e.what());
  }
}

}  // namespace

template <std::floating_point T>
Network<T> network_from_checkpoint(const Checkpoint& ck) {
  return format_guard([&] {
    Network<T> net(network_config_from_json(section(ck.config, "network")));
    load_parameters(net, ck);
    const auto& state = section(ck.config, "state");
    net.set_calibrated(state.value("calibrated", false));
    return net;
  });
}

template <std::floating_point T>
Trainer<T> Trainer<T>::restore(const Checkpoint& ck) {
  return Trainer(Restore{}, ck);
}

template <std::floating_point T>
Trainer<T>::Trainer(Restore, const Checkpoint& ck)
    : cfg_(format_guard([&] {
        return train_config_from_json(section(ck.config, "train"), TrainConfig{});
      })),
      net_(network_from_checkpoint<T>(ck)),
      shuffle_seed_(derive_seed(cfg_.seed, "shuffle")) {
  format_guard([&] {
    const auto& state = section(ck.config, "state");
    epoch_ = state.at("epoch").get<std::size_t>();
    cursor_ = state.at("cursor").get<std::size_t>();
    step_ = state.at("step").get<std::size_t>();
    shuffle_seed_ = state.at("shuffle_seed").get<std::uint64_t>();
    best_test_accuracy_ = state.at("best_test_accuracy").get<double>();
    for (const auto& m : state.at("history"))
      history_.push_back({m.at("epoch").get<std::size_t>(),
                          m.at("split").get<std::string>(),
                          m.at("accuracy_percent").get<double>(),
                          m.at("mean_loss").get<double>()});
    const auto& a = state.at("adam");
    adam_.t = a.at("t").get<std::uint64_t>();
    adam_.config.lr = a.at("lr").get<double>();
    adam_.config.beta1 = a.at("beta1").get<double>();
    adam_.config.beta2 = a.at("beta2").get<double>();
    adam_.config.eps = a.at("eps").get<double>();
    return 0;
  });
  auto params = net_.parameters();
  for (auto* p : params) {
    const Tensor* m = ck.find("adam.m:" + p->name);
    const Tensor* v = ck.find("adam.v:" + p->name);
    if (!m && !v) continue;
    if (!m || !v || m->shape() != p->value.shape() || v->shape() != p->value.shape())
      throw FormatError("checkpoint: inconsistent optimizer moments for " + p->name);
    adam_.m.push_back(m->template cast<T>());
    adam_.v.push_back(v->template cast<T>());
  }
  if (!adam_.m.empty() && adam_.m.size() != params.size())
    throw FormatError("checkpoint: optimizer moments missing for some parameters");
}

template void adam_step<float>(std::span<BasicParameter<float>* const>,
                               AdamState<float>&);
template void adam_step<double>(std::span<BasicParameter<double>* const>,
                                AdamState<double>&);
template EvalResult evaluate<float>(Network<float>&, const Dataset&, std::size_t);
template EvalResult evaluate<double>(Network<double>&, const Dataset&, std::size_t);
template Network<float> network_from_checkpoint<float>(const Checkpoint&);
template Network<double> network_from_checkpoint<double>(const Checkpoint&);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace rfsnn
