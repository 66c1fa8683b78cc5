#include "g2flow.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "app/commands.hpp"
#include "g2/parallel.hpp"

struct g2flow_config {
  g2::app::RunConfig cfg;
};

struct g2flow_result {
  g2::app::CommandResult res;
};

namespace {

thread_local std::string last_error;
thread_local int last_line = 0;

void clear() {
  last_error.clear();
  last_line = 0;
}

g2flow_status fail(g2flow_status s, const std::string& msg, int line = 0) {
  last_error = msg;
  last_line = line;
  return s;
}

// Runs body, mapping every exception onto a status and the thread's message.
template <class F>
g2flow_status guarded(F&& body) {
  clear();
  try {
    return body();
  } catch (const g2::ConfigError& e) {
    return fail(static_cast<g2flow_status>(e.code()), e.what(), e.line());
  } catch (const g2::app::UsageError& e) {
    return fail(G2FLOW_E_USAGE, e.what());
  } catch (const g2::Error& e) {
    return fail(static_cast<g2flow_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(G2FLOW_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(G2FLOW_E_INTERNAL, e.what());
  }
}

}  // namespace

extern "C" {

const char* g2flow_version(void) { return "1.0.0"; }

const char* g2flow_status_name(g2flow_status status) {
  switch (status) {
    case G2FLOW_OK: return "ok";
    case G2FLOW_E_USAGE: return "usage";
    case G2FLOW_E_CHECK_FAILED: return "check_failed";
    case G2FLOW_E_INTERNAL: return "internal";
    default: break;
  }
  if (status >= G2FLOW_E_INVALID_ARGUMENT && status <= G2FLOW_E_IO)
    return g2::error_code_name(static_cast<g2::ErrorCode>(status));
  return "unknown";
}

int g2flow_exit_code(g2flow_status status) {
  switch (status) {
    case G2FLOW_OK: return 0;
    case G2FLOW_E_USAGE:
    case G2FLOW_E_PARSE:
    case G2FLOW_E_UNKNOWN_KEY:
    case G2FLOW_E_DUPLICATE_KEY: return 2;
    default: return 1;
  }
}

const char* g2flow_last_error(void) { return last_error.c_str(); }
int g2flow_last_error_line(void) { return last_line; }

g2flow_status g2flow_set_threads(int n) {
  clear();
  if (n < 1) return fail(G2FLOW_E_USAGE, "thread count must be >= 1");
  g2::set_thread_count(n);
  return G2FLOW_OK;
}

int g2flow_threads(void) { return g2::thread_count(); }

g2flow_status g2flow_config_parse(const char* text, g2flow_config** out) {
  if (!text || !out) return fail(G2FLOW_E_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new g2flow_config{g2::app::parse_config(text)};
    return G2FLOW_OK;
  });
}

g2flow_status g2flow_config_load(const char* path, g2flow_config** out) {
  if (!path || !out) return fail(G2FLOW_E_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new g2flow_config{g2::app::load_config(path)};
    return G2FLOW_OK;
  });
}

g2flow_status g2flow_config_set_output(g2flow_config* cfg, const char* dir) {
  if (!cfg || !dir || !*dir) return fail(G2FLOW_E_USAGE, "null or empty argument");
  clear();
  cfg->cfg.output = dir;
  return G2FLOW_OK;
}

g2flow_status g2flow_config_resolved(const g2flow_config* cfg, char* buf, size_t cap, size_t* len) {
  if (!cfg || (!buf && cap > 0)) return fail(G2FLOW_E_USAGE, "null argument");
  return guarded([&] {
    const std::string dump = g2::app::resolved_dump(cfg->cfg);
    if (len) *len = dump.size();
    if (cap > 0) {
      const size_t n = std::min(cap - 1, dump.size());
      std::memcpy(buf, dump.data(), n);
      buf[n] = '\0';
    }
    return G2FLOW_OK;
  });
}

void g2flow_config_free(g2flow_config* cfg) { delete cfg; }

g2flow_status g2flow_run(const g2flow_config* cfg, const char* command, g2flow_result** out) {
  if (!cfg || !command || !out) return fail(G2FLOW_E_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto* r = new g2flow_result{g2::app::run_command(command, cfg->cfg)};
    *out = r;
    if (!r->res.checks_passed) return fail(G2FLOW_E_CHECK_FAILED, "a reported check failed");
    return G2FLOW_OK;
  });
}

const char* g2flow_result_summary(const g2flow_result* res) { return res ? res->res.summary.c_str() : ""; }
int g2flow_result_singular(const g2flow_result* res) { return res && res->res.singular ? 1 : 0; }
void g2flow_result_free(g2flow_result* res) { delete res; }

g2flow_status g2flow_fit_blowup(const double* t, const double* lambda, size_t n, g2flow_blowup* out) {
  if (!t || !lambda || !out) return fail(G2FLOW_E_USAGE, "null argument");
  return guarded([&] {
    const g2::BlowupFit f = g2::fit_blowup(std::vector<double>(t, t + n), std::vector<double>(lambda, lambda + n));
    *out = g2flow_blowup{f.C_hat, f.exponent, f.T_hat, f.rate_constant, f.rms_residual, f.samples};
    return G2FLOW_OK;
  });
}

}  // extern "C"
