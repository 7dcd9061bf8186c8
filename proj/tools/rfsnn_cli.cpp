// rfsnn: train, evaluate, verify and account for resonator-chain networks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfsnn/gradcheck.hpp"
#include "rfsnn/hardware_map.hpp"
#include "rfsnn/training.hpp"

namespace {

using namespace rfsnn;

constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

struct TrainArgs {
  std::string config;
  std::string data_dir;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string metrics;
  std::string preset = "full";
  std::optional<std::size_t> threads;
};

template <std::floating_point T>
int run_training(const RunConfig& rc, const Dataset& train, const Dataset& test) {
  Trainer<T> trainer(rc.network, rc.train);
  trainer.fit(train, test, [](const EpochMetrics& m) {
    std::fprintf(stderr, "epoch %zu %-5s accuracy %.2f%%  loss %.5f\n", m.epoch,
                 m.split.c_str(), m.accuracy_percent, m.mean_loss);
  });
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const Preset preset = parse_preset(a.preset);
  RunConfig rc = a.config.empty() ? preset_run_config(preset)
                                  : run_config_from_json(read_json_file(a.config), preset);
  if (!a.data_dir.empty()) rc.train.data_dir = a.data_dir;
  if (a.seed) rc.train.seed = *a.seed;
  if (a.threads) rc.train.threads = *a.threads;
  if (!a.out.empty()) rc.train.checkpoint_path = a.out;
  if (!a.metrics.empty())
    rc.train.metrics_path = a.metrics;
  else if (!a.out.empty())
    rc.train.metrics_path = std::filesystem::path(a.out).replace_extension(".csv").string();
  rc.train.validate();
  if (rc.train.data_dir.empty()) throw ConfigError("train: no data directory given");

  const Dataset train = load_mnist_train(rc.train.data_dir).head(rc.train.train_limit);
  const Dataset test = load_mnist_test(rc.train.data_dir).head(rc.train.test_limit);
  std::fprintf(stderr, "training on %zu samples, testing on %zu\n", train.size(),
               test.size());
  return rc.network.float_width == 64 ? run_training<double>(rc, train, test)
                                      : run_training<float>(rc, train, test);
}

int cmd_eval(const std::string& model, const std::string& data_dir,
             std::optional<std::size_t> threads) {
  const Checkpoint ck = load_checkpoint(model);
  TrainConfig tc;
  try {
    tc = train_config_from_json(ck.config.at("train"), TrainConfig{});
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: invalid stored config: ") + e.what());
  }
  const std::string dir = data_dir.empty() ? tc.data_dir : data_dir;
  const Dataset test = load_mnist_test(dir).head(tc.test_limit);
  const std::size_t lanes = threads.value_or(tc.threads);
  EvalResult r;
  if (ck.config.at("network").value("float_width", 32) == 64) {
    auto net = network_from_checkpoint<double>(ck);
    r = evaluate(net, test, lanes);
  } else {
    auto net = network_from_checkpoint<float>(ck);
    r = evaluate(net, test, lanes);
  }
  nlohmann::json out{{"split", "test"},
                     {"samples", r.samples},
                     {"accuracy_percent", r.accuracy_percent},
                     {"mean_loss", r.mean_loss}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const GradCheckOptions& opts) {
  bool ok = true;
  for (const auto& r : run_gradient_suite(opts)) {
    std::printf("%-4s %-36s max rel err %.3e (tol %.1e, %zu checked, %zu at kinks)\n",
                r.passed ? "ok" : "FAIL", r.name.c_str(), r.max_rel_error, r.tolerance,
                r.checked, r.skipped);
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int cmd_hw_report(const std::string& config, const std::string& preset,
                  const std::string& arrangement, const std::string& format) {
  const RunConfig rc = config.empty()
                           ? preset_run_config(parse_preset(preset))
                           : run_config_from_json(read_json_file(config),
                                                  parse_preset(preset));
  const LayoutReport report = count_devices(rc.network, parse_arrangement(arrangement));
  if (format == "json")
    std::cout << to_json(report).dump(2) << "\n";
  else
    std::cout << to_text(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spintronic resonator-chain neural networks"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network and write checkpoint + metrics CSV");
  train->add_option("--config", ta.config, "JSON config with network/train/device sections");
  train->add_option("--data-dir", ta.data_dir, "Directory with the MNIST IDX files");
  train->add_option("--seed", ta.seed, "Master seed (init and shuffle sub-seeds derive from it)");
  train->add_option("--out", ta.out, "Checkpoint path");
  train->add_option("--metrics", ta.metrics, "Metrics CSV path (default: <out>.csv)");
  train->add_option("--preset", ta.preset, "full or desk")
      ->check(CLI::IsMember({"full", "desk"}));
  train->add_option("--threads", ta.threads, "Worker lanes")->check(CLI::PositiveNumber);

  std::string model, eval_dir;
  std::optional<std::size_t> eval_threads;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
  eval->add_option("--model", model, "Checkpoint path")->required();
  eval->add_option("--data-dir", eval_dir, "Directory with the MNIST IDX files");
  eval->add_option("--threads", eval_threads, "Worker lanes")->check(CLI::PositiveNumber);

  GradCheckOptions gopts;
  auto* grad = app.add_subcommand("gradcheck", "Verify analytic gradients against finite differences");
  grad->add_option("--tolerance", gopts.tolerance, "Relative error bound")->capture_default_str();
  grad->add_option("--seed", gopts.seed, "Seed for the random probe points")->capture_default_str();
  grad->add_flag("--inject-fault", gopts.inject_fault)->group("");

  std::string hw_config, hw_preset = "full", arrangement = "crossbar", format = "text";
  auto* hw = app.add_subcommand("hw-report", "Device counts and frequency plan of a network");
  hw->add_option("--config", hw_config, "JSON config (network section is used)");
  hw->add_option("--preset", hw_preset, "full or desk, when no config is given")
      ->check(CLI::IsMember({"full", "desk"}));
  hw->add_option("--arrangement", arrangement, "crossbar or compact")
      ->check(CLI::IsMember({"crossbar", "compact"}));
  hw->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(model, eval_dir, eval_threads);
    if (*grad) return cmd_gradcheck(gopts);
    if (*hw) return cmd_hw_report(hw_config, hw_preset, arrangement, format);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kExitFormat;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitConfig;
}
