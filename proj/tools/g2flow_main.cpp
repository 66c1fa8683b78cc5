#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "g2flow.h"

namespace {

int report(g2flow_status s) {
  const int line = g2flow_last_error_line();
  if (line > 0)
    std::fprintf(stderr, "g2flow: %s (line %d): %s\n", g2flow_status_name(s), line, g2flow_last_error());
  else
    std::fprintf(stderr, "g2flow: %s: %s\n", g2flow_status_name(s), g2flow_last_error());
  return g2flow_exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flows of G2 structures on periodic grids"};
  std::string command, config, out;
  int threads = 0;
  bool verbose = false;
  app.add_option("command", command, "validate | evolve | entropy | collapse | fit-blowup")
      ->required()
      ->check(CLI::IsMember({"validate", "evolve", "entropy", "collapse", "fit-blowup"}));
  app.add_option("--config", config, "run configuration")->required();
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--threads", threads, "worker threads; falls back to G2FLOW_THREADS")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "print the resolved configuration and timing");
  app.set_version_flag("--version", g2flow_version());
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads == 0) {
    if (const char* env = std::getenv("G2FLOW_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1) {
        std::fprintf(stderr, "g2flow: usage: G2FLOW_THREADS must be a positive integer\n");
        return 2;
      }
      threads = static_cast<int>(v);
    } else {
      threads = 1;
    }
  }
  if (g2flow_status s = g2flow_set_threads(threads); s != G2FLOW_OK) return report(s);

  g2flow_config* cfg = nullptr;
  if (g2flow_status s = g2flow_config_load(config.c_str(), &cfg); s != G2FLOW_OK) return report(s);
  if (!out.empty()) g2flow_config_set_output(cfg, out.c_str());
  if (verbose) {
    size_t len = 0;
    g2flow_config_resolved(cfg, nullptr, 0, &len);
    std::string dump(len + 1, '\0');
    g2flow_config_resolved(cfg, dump.data(), dump.size(), &len);
    dump.resize(len);
    std::fprintf(stderr, "%s", dump.c_str());
  }

  const auto t0 = std::chrono::steady_clock::now();
  g2flow_result* res = nullptr;
  const g2flow_status s = g2flow_run(cfg, command.c_str(), &res);
  g2flow_config_free(cfg);
  if (res) std::fputs(g2flow_result_summary(res), stdout);
  if (verbose)
    std::fprintf(stderr, "elapsed = %.3f s\n",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  const bool singular = g2flow_result_singular(res) != 0;
  g2flow_result_free(res);
  if (s != G2FLOW_OK) return report(s);
  if (singular) std::fprintf(stderr, "g2flow: singularity candidate flagged; see SINGULAR\n");
  return 0;
}
