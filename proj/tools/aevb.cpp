// aevb: train / eval / generate / export-latents.
//
// exit codes: 0 ok, 2 bad config or input, 3 training diverged, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aevb/config.hpp"
#include "aevb/errors.hpp"
#include "aevb/run.hpp"

using namespace aevb;

namespace {

struct Options {
  std::string config_path;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string checkpoint;
  std::string mode;
  std::size_t n = 0;
};

// preset, then config file, then --set, then --seed.
std::optional<RunConfig> resolve(const Options& o) {
  std::optional<RunConfig> c;
  if (!o.preset.empty()) c = find_preset(o.preset).config;
  if (!o.config_path.empty()) c = load_config_file(o.config_path, c);
  if (!o.sets.empty()) {
    std::string text;
    for (const auto& s : o.sets) text += s + "\n";
    c = parse_config(text, c);
  }
  if (o.seed) {
    if (!c) c = RunConfig::defaults("fa");
    c->seed = *o.seed;
  }
  if (c) c->validate();
  return c;
}

void print_presets() {
  for (const auto& p : presets()) std::printf("  %-16s %s\n", p.name.c_str(), p.description.c_str());
}

int train_cmd(const Options& o) {
  if (o.preset.empty() && o.config_path.empty())
    throw FormatError("train: give --preset or --config");
  const RunConfig c = *resolve(o);
  const std::string out = o.out.empty() ? "runs/" + (o.preset.empty() ? c.model : o.preset) : o.out;
  TrainRun run = run_train(c, out, [&](std::size_t step, LatentModel&) {
    if (step % c.eval_every == 0) std::fprintf(stderr, "\rstep %zu/%zu", step, c.steps);
  });
  std::fprintf(stderr, "\n");
  const auto& last = run.result.log.rows.back();
  std::printf("%s\n%s\n", MetricsLog::csv_header().c_str(), MetricsLog::csv_line(last).c_str());
  std::printf("wrote %s/{config.txt,metrics.csv,checkpoint.bin}%s\n", out.c_str(),
              run.result.early_stopped ? " (early stop)" : "");
  return 0;
}

int eval_cmd(const Options& o) {
  const auto data = resolve(o);
  const MetricsRow row = run_eval(o.checkpoint, data, o.out);
  std::printf("%s\n%s\n", MetricsLog::csv_header().c_str(), MetricsLog::csv_line(row).c_str());
  return 0;
}

int generate_cmd(const Options& o) {
  const LoadedRun run = load_run(o.checkpoint);
  const std::string mode = o.mode.empty() ? default_generate_mode(run.config.model) : o.mode;
  std::size_t n = o.n;
  if (n == 0) n = mode == "unconditional" || mode == "sequential" ? 30 : (mode == "per_cluster" ? 15 : 10);
  const std::string out = o.out.empty() ? "generated" : o.out;
  const GenerateResult g = run_generate(o.checkpoint, mode, n, o.seed.value_or(0), out);
  std::printf("%s: %zu x %zu grid -> %s/generated.pgm, %s/generated.csv\n", g.mode.c_str(), g.rows, g.cols,
              out.c_str(), out.c_str());
  return 0;
}

int export_cmd(const Options& o) {
  const auto data = resolve(o);
  const std::string out = o.out.empty() ? "latents.csv" : o.out;
  const Tensor means = run_export_latents(o.checkpoint, data, out);
  std::printf("%zu rows x %zu dims -> %s\n", means.dim(0), means.dim(1), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-encoding variational Bayes: FA, VAE, CVAE, GMVAE and VRNN"};
  app.require_subcommand(0, 1);
  Options o;
  bool list = false;
  app.add_flag("--list-presets", list, "List the built-in presets");

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "Built-in preset to start from");
    cmd->add_option("--set", o.sets, "Extra key=value assignment (repeatable)");
    cmd->add_option("--seed", o.seed, "Overrides the config seed");
  };

  auto* train = app.add_subcommand("train", "Train a model and write metrics, config and checkpoint");
  add_config_flags(train);
  train->add_option("--out", o.out, "Output directory (default runs/<preset>)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint.bin")->required();
  add_config_flags(eval);
  eval->add_option("--out", o.out, "Directory for eval.csv");

  auto* gen = app.add_subcommand("generate", "Sample images from a checkpoint");
  gen->add_option("--checkpoint", o.checkpoint, "checkpoint.bin")->required();
  gen->add_option("--mode", o.mode, "unconditional | per_label | per_cluster | sequential");
  gen->add_option("--n", o.n, "Images (per row for per_label / per_cluster)");
  gen->add_option("--seed", o.seed, "Sampling seed (default 0)");
  gen->add_option("--out", o.out, "Output directory");

  auto* exp = app.add_subcommand("export-latents", "Write encoder means of the test split");
  exp->add_option("--checkpoint", o.checkpoint, "checkpoint.bin")->required();
  add_config_flags(exp);
  exp->add_option("--out", o.out, "CSV path (default latents.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (list || app.get_subcommands().empty()) {
      if (!list) std::cout << app.help() << "\n";
      std::printf("presets:\n");
      print_presets();
      return list ? 0 : 2;
    }
    if (train->parsed()) return train_cmd(o);
    if (eval->parsed()) return eval_cmd(o);
    if (gen->parsed()) return generate_cmd(o);
    return export_cmd(o);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "\nerror: %s\n", e.what());
    return 3;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
