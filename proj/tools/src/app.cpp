#include <iostream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "dcmgnn/common.hpp"
#include "dcmgnn_cli/cli.hpp"
#include "fields.hpp"

namespace dcmgnn::cli {

namespace {

template <class Config>
void bind_run_options(CLI::App& sub, Config& config) {
  for_each_field(config, [&sub](const char* name, const char* help, auto& value) {
    const std::string flag = std::string("--") + name;
    if constexpr (std::is_same_v<std::decay_t<decltype(value)>, bool>) {
      sub.add_flag(flag, value, help);
    } else {
      sub.add_option(flag, value, help)->capture_default_str();
    }
  });
}

// Pulls `--config FILE` / `--config=FILE` out of `args` and returns FILE.
std::optional<std::string> take_config_path(std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file name");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return path;
}

int parse_and_run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  CLI::App app{"DCMGNN multi-behavior recommender", "dcmgnn"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  RunConfig run;
  SynthConfig synth;
  std::string config_help;
  auto* train = app.add_subcommand("train", "train a model and write metrics, logs and a checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "rank test items with a checkpoint and print metrics");
  auto* inspect = app.add_subcommand("inspect-patterns", "print per-pattern edge counts and the relation chains");
  auto* gen = app.add_subcommand("synth", "write a synthetic dataset with planted cascade preferences");
  for (auto* sub : {train, evaluate, inspect, gen}) {
    sub->add_option("--config", config_help, "flat key=value file; command-line flags win");
  }
  for (auto* sub : {train, evaluate, inspect}) bind_run_options(*sub, run);
  for_each_synth_field(synth, [gen](const char* name, const char* help, auto& value) {
    gen->add_option(std::string("--") + name, value, help)->capture_default_str();
  });

  // Config values go in front of the real flags so that the flags win.
  std::vector<std::string> args = raw;
  const auto config_path = take_config_path(args);
  if (config_path && !args.empty()) {
    CLI::App* sub = nullptr;
    for (auto* s : {train, evaluate, inspect, gen}) {
      if (s->get_name() == args.front()) sub = s;
    }
    if (sub == nullptr) throw ConfigError("--config must follow a subcommand");
    std::vector<std::string> injected;
    for (const auto& [key, value] : read_flat_config(*config_path)) {
      const auto* opt = sub->get_option_no_throw("--" + key);
      if (opt == nullptr || key == "config") {
        throw ConfigError(*config_path + ": unknown key '" + key + "' for " + sub->get_name());
      }
      if (!value.empty()) injected.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + 1, injected.begin(), injected.end());
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  if (train->parsed()) return cmd_train(run, out, err);
  if (evaluate->parsed()) return cmd_evaluate(run, out, err);
  if (inspect->parsed()) return cmd_inspect_patterns(run, out, err);
  return cmd_synth(synth, out, err);
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return parse_and_run(args, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dcmgnn::cli
