#include "bdprop.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"

#include "bdprop/bench.hpp"
#include "bdprop/system.hpp"

struct bdp_net {
  bdprop::ParsedNet net;
};

namespace {

thread_local std::string g_last_error;

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bdp_status fail(bdp_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class Fn>
bdp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BDP_OK;
  } catch (const bdprop::BreakdownError& e) {
    return fail(BDP_ERR_BREAKDOWN, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(BDP_ERR_PARSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(BDP_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(BDP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BDP_ERR_INTERNAL, e.what());
  }
}

bdp_status require(bool ok, const char* what) {
  return ok ? BDP_OK : fail(BDP_ERR_INVALID_ARGUMENT, what);
}

}  // namespace

extern "C" {

const char* bdp_version(void) { return "1.0.0"; }

const char* bdp_status_name(bdp_status status) {
  switch (status) {
    case BDP_OK: return "ok";
    case BDP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BDP_ERR_PARSE: return "parse error";
    case BDP_ERR_DIMENSION: return "dimension mismatch";
    case BDP_ERR_BREAKDOWN: return "diagonal breakdown";
    case BDP_ERR_IO: return "i/o error";
    case BDP_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* bdp_last_error(void) { return g_last_error.c_str(); }

bdp_status bdp_net_generate(const char* spec_json, bdp_net** out) {
  if (bdp_status s = require(spec_json && out, "null argument")) return s;
  return guarded([&] {
    const bdprop::ExperimentSpec spec = bdprop::spec_from_json(spec_json);
    auto handle = std::make_unique<bdp_net>();
    if (spec.kind == "rnn") {
      handle->net.is_rnn = true;
      handle->net.rnn = bdprop::generate_rnn(spec);
    } else {
      handle->net.fnn = bdprop::generate_fnn(spec);
    }
    *out = handle.release();
  });
}

bdp_status bdp_net_from_json(const char* json_text, bdp_net** out) {
  if (bdp_status s = require(json_text && out, "null argument")) return s;
  return guarded([&] {
    auto handle = std::make_unique<bdp_net>();
    handle->net = bdprop::net_from_json(json_text);
    *out = handle.release();
  });
}

bdp_status bdp_net_to_json(const bdp_net* net, char** out) {
  if (bdp_status s = require(net && out, "null argument")) return s;
  return guarded([&] {
    *out = copy_string(net->net.is_rnn ? bdprop::net_to_json(net->net.rnn)
                                       : bdprop::net_to_json(net->net.fnn));
  });
}

bdp_status bdp_net_load_file(const char* path, bdp_net** out) {
  if (bdp_status s = require(path && out, "null argument")) return s;
  std::ifstream in(path);
  if (!in) return fail(BDP_ERR_IO, std::string("cannot open ") + path);
  std::ostringstream text;
  text << in.rdbuf();
  return bdp_net_from_json(text.str().c_str(), out);
}

bdp_status bdp_net_save_file(const bdp_net* net, const char* path) {
  if (bdp_status s = require(net && path, "null argument")) return s;
  char* text = nullptr;
  if (bdp_status s = bdp_net_to_json(net, &text)) return s;
  std::ofstream outf(path);
  if (!outf) {
    bdp_string_free(text);
    return fail(BDP_ERR_IO, std::string("cannot write ") + path);
  }
  outf << text;
  bdp_string_free(text);
  return outf ? BDP_OK : fail(BDP_ERR_IO, std::string("cannot write ") + path);
}

size_t bdp_net_depth(const bdp_net* net) {
  if (!net) return 0;
  return net->net.is_rnn ? net->net.rnn.depth() : net->net.fnn.depth();
}

size_t bdp_net_width(const bdp_net* net, size_t level) {
  if (!net) return 0;
  const std::vector<size_t> widths =
      net->net.is_rnn ? net->net.rnn.widths() : net->net.fnn.widths();
  return level < widths.size() ? widths[level] : 0;
}

void bdp_net_free(bdp_net* net) { delete net; }

bdp_status bdp_run_experiment(const char* spec_json, char** report_json) {
  if (bdp_status s = require(spec_json && report_json, "null argument")) return s;
  return guarded([&] {
    const bdprop::ExperimentSpec spec = bdprop::spec_from_json(spec_json);
    const bdprop::ExperimentReport report = bdprop::run_experiment(spec);
    *report_json = copy_string(bdprop::report_to_json(report));
  });
}

bdp_status bdp_report_csv_header(char** out) {
  if (bdp_status s = require(out != nullptr, "null argument")) return s;
  return guarded([&] { *out = copy_string(bdprop::report_csv_header()); });
}

bdp_status bdp_run_experiment_csv(const char* spec_json, char** csv_row) {
  if (bdp_status s = require(spec_json && csv_row, "null argument")) return s;
  return guarded([&] {
    const bdprop::ExperimentSpec spec = bdprop::spec_from_json(spec_json);
    const bdprop::ExperimentReport report = bdprop::run_experiment(spec);
    *csv_row = copy_string(bdprop::report_csv_row(report));
  });
}

bdp_status bdp_appendix_check(const char* spec_json, char** report_json) {
  if (bdp_status s = require(spec_json && report_json, "null argument")) return s;
  return guarded([&] {
    const bdprop::ExperimentSpec spec = bdprop::spec_from_json(spec_json);
    const bdprop::AppendixReport report = bdprop::run_appendix_check(spec);
    *report_json = copy_string(bdprop::appendix_report_to_json(report));
  });
}

bdp_status bdp_stale_experiment(const char* spec_json, const double* sigmas, size_t n_sigmas,
                                char** report_json) {
  if (bdp_status s = require(spec_json && report_json && (sigmas || n_sigmas == 0),
                             "null argument"))
    return s;
  return guarded([&] {
    const bdprop::ExperimentSpec spec = bdprop::spec_from_json(spec_json);
    std::vector<bdprop::StaleRun> runs;
    runs.reserve(n_sigmas);
    for (size_t i = 0; i < n_sigmas; ++i)
      runs.push_back(bdprop::stale_diagonal_run(spec, sigmas[i]));
    *report_json = copy_string(bdprop::stale_report_to_json(spec, runs));
  });
}

void bdp_string_free(char* s) { delete[] s; }

}  // extern "C"
