#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amdnet/commands.hpp"
#include "amdnet/io.hpp"

using namespace amdnet;

namespace {

struct SharedFlags {
  std::string config;
  std::string out;
  int64_t seed = 0;
  std::vector<std::string> overrides;
};

void add_shared(CLI::App* sub, SharedFlags* flags) {
  sub->add_option("--config", flags->config, "Flat key = value config file");
  sub->add_option("--seed", flags->seed, "Master seed (overrides config)");
  sub->add_option("--out", flags->out, "Output directory (overrides config)");
  sub->add_option("--set", flags->overrides,
                  "Extra key=value overrides, repeatable");
}

KeyValues build_config(const CLI::App* sub, const SharedFlags& flags) {
  KeyValues kv = flags.config.empty() ? KeyValues()
                                      : KeyValues::from_file(flags.config);
  for (const std::string& o : flags.overrides) {
    const size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (sub->count("--seed")) kv.set("seed", std::to_string(flags.seed));
  if (sub->count("--out")) kv.set("out", flags.out);
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV motion segmentation and velocity grids from LiDAR"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const KeyValues&);
  };
  const std::vector<Command> commands = {
      {"gen", "Generate a synthetic scene dataset with a train/val index",
       cmd_gen},
      {"train", "Train a model variant on an index's train split", cmd_train},
      {"eval", "Score a checkpoint and baselines, both ROI modes", cmd_eval},
      {"infer", "Predict one scene window and cluster dynamic boxes",
       cmd_infer},
      {"render", "Render a motion grid as a portable pixmap", cmd_render},
      {"bench", "Time forward passes at the configured grid size", cmd_bench},
  };

  SharedFlags flags;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_shared(sub, &flags);
    sub->callback([sub, &flags, fn = c.fn] { fn(build_config(sub, flags)); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
