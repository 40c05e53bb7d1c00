#pragma once

// Command runner behind the rankda executable. Each command reads a JSON
// configuration (see README for the grammar), writes its artifacts under the
// output directory, and records a manifest with the resolved configuration,
// its hash and the seed. Re-running a command on the manifest's "config"
// reproduces every artifact byte for byte.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rankda/diagnostics.hpp"
#include "rankda/em.hpp"
#include "rankda/error.hpp"
#include "rankda/estimators.hpp"
#include "rankda/io.hpp"
#include "rankda/model.hpp"
#include "rankda/oracle.hpp"
#include "rankda/samplers.hpp"

namespace rankda {

using nlohmann::json;

inline constexpr const char* kOutputEnv = "RANKDA_OUT";
inline constexpr const char* kVersion = "1.0.0";

/// Values given on the command line; each overrides the configuration.
struct CliOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> schema;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace cfg {

inline void allow_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline std::size_t count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

inline ChainConfig chain(const json& j, std::uint64_t seed, const std::string& where, Kernel kernel) {
  ChainConfig c;
  c.kernel = kernel;
  c.seed = seed;
  if (j.is_null()) return c;
  allow_keys(j, {"iterations", "burnin", "thin", "kernel", "chains", "init"}, where);
  c.iterations = count(j, "iterations", c.iterations, where);
  c.burnin = count(j, "burnin", c.burnin, where);
  c.thin = count(j, "thin", c.thin, where);
  if (j.contains("kernel")) c.kernel = kernel_from_string(get<std::string>(j, "kernel", "", where));
  c.validate();
  return c;
}

}  // namespace cfg

/// Everything a command needs, resolved from the configuration.
struct ResolvedInputs {
  json config;  // with command-line overrides applied
  std::uint64_t seed = 1;
  std::filesystem::path out;
};

inline json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

/// Applies command-line overrides and resolves the output directory: --out,
/// then the RANKDA_OUT environment variable, then "output", then "out".
inline ResolvedInputs resolve(const CliOptions& opt) {
  ResolvedInputs r;
  r.config = opt.config ? load_config_file(*opt.config) : json::object();
  if (!r.config.is_object()) throw ConfigError("config: top level must be an object");
  auto& c = r.config;
  if (opt.seed) c["seed"] = *opt.seed;
  if (opt.chains) c["chain"]["chains"] = *opt.chains;
  if (opt.data || opt.schema) {
    json d = c.contains("data") ? c["data"] : json::object();
    if (opt.data) d["path"] = std::filesystem::absolute(*opt.data).lexically_normal().string();
    if (opt.schema) d["schema"] = std::filesystem::absolute(*opt.schema).lexically_normal().string();
    c["data"] = d;
  }
  r.seed = cfg::get<std::uint64_t>(c, "seed", 1, "config");
  std::string out = cfg::get<std::string>(c, "output", "out", "config");
  if (const char* env = std::getenv(kOutputEnv); env && *env) out = env;
  if (opt.out) out = opt.out->string();
  r.out = out;
  return r;
}

namespace detail {

inline std::shared_ptr<const GroupTables> tables_for(int p) { return std::make_shared<const GroupTables>(p); }

/// Counts from "counts" (inline rows), "counts_file", or "data" {path, schema}.
inline RankCounts config_counts(const json& c) {
  int sources = c.contains("counts") + c.contains("counts_file") + c.contains("data");
  if (sources != 1) throw ConfigError("config: give exactly one of counts, counts_file, data");
  if (c.contains("counts")) {
    std::vector<std::vector<std::int64_t>> rows;
    try {
      rows = c.at("counts").get<std::vector<std::vector<std::int64_t>>>();
    } catch (const json::exception&) {
      throw ConfigError("config.counts: expected an array of integer arrays");
    }
    if (rows.empty()) throw ConfigError("config.counts: no categories");
    int p = 1;
    while (p < kDefaultMaxItems && factorial(p) < rows[0].size()) ++p;
    if (factorial(p) != rows[0].size()) throw ConfigError("config.counts: row length is not p! for any p");
    try {
      return RankCounts(p, std::move(rows));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config.counts: ") + e.what());
    }
  }
  if (c.contains("counts_file")) {
    const auto path = cfg::get<std::string>(c, "counts_file", "", "config");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_counts(in, path);
  }
  const auto& d = c.at("data");
  cfg::allow_keys(d, {"path", "schema"}, "config.data");
  const auto schema = load_schema(cfg::require<std::string>(d, "schema", "config.data"));
  return load_dataset(cfg::require<std::string>(d, "path", "config.data"), schema).counts;
}

inline PriorPi config_prior(const json& c, std::size_t g, std::size_t states) {
  if (!c.contains("prior") || (c["prior"].is_string() && c["prior"] == "uniform")) return PriorPi::uniform(g, states);
  const auto& p = c["prior"];
  cfg::allow_keys(p, {"pmf", "file"}, "config.prior");
  json pmf;
  if (p.contains("pmf")) {
    pmf = p["pmf"];
  } else if (p.contains("file")) {
    const auto path = cfg::get<std::string>(p, "file", "", "config.prior");
    pmf = load_config_file(path);
  } else {
    throw ConfigError("config.prior: expected \"uniform\", {\"pmf\": ...} or {\"file\": ...}");
  }
  std::vector<std::vector<double>> rows;
  try {
    rows = pmf.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    throw ConfigError("config.prior: pmf must be an array of arrays");
  }
  if (rows.size() != g) throw ConfigError("config.prior: one pmf per category required");
  for (const auto& r : rows)
    if (r.size() != states) throw ConfigError("config.prior: each pmf needs p! entries");
  try {
    return PriorPi(std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.prior: ") + e.what());
  }
}

inline HyperParams config_hyper(const json& c, const GroupTables& tables) {
  json h = c.contains("hyper") ? c["hyper"] : json::object();
  cfg::allow_keys(h, {"lambda", "scale"}, "config.hyper");
  const double lambda = cfg::get<double>(h, "lambda", 0.0, "config.hyper");
  const double scale = cfg::get<double>(h, "scale", 1.0, "config.hyper");
  try {
    return HyperParams::from_lambda(lambda, tables, scale);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.hyper: ") + e.what());
  }
}

inline Model config_model(const json& c) {
  auto counts = config_counts(c);
  auto tables = tables_for(counts.items());
  auto hyp = config_hyper(c, *tables);
  auto prior = config_prior(c, counts.categories(), tables->size());
  return Model(tables, std::move(counts), std::move(hyp), std::move(prior));
}

inline std::vector<PermIndex> rank_list(const json& j, std::size_t states, const std::string& where) {
  std::vector<std::size_t> v;
  try {
    v = j.get<std::vector<std::size_t>>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": expected an array of ranking indices");
  }
  std::vector<PermIndex> out;
  for (auto k : v) {
    if (k < 1 || k > states) throw ConfigError(where + ": ranking index out of range");
    out.emplace_back(k);
  }
  return out;
}

class Artifacts {
public:
  Artifacts(std::filesystem::path dir, std::string command, const ResolvedInputs& in)
      : dir_(std::move(dir)), command_(std::move(command)), in_(in) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  std::filesystem::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  void text(const std::string& name, const std::string& content) { write_text(path(name), content); }

  void finish() {
    json m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["seed"] = in_.seed;
    m["config"] = in_.config;
    m["config_hash"] = hex64(fnv1a(in_.config.dump()));
    m["files"] = files_;
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

private:
  std::filesystem::path dir_;
  std::string command_;
  const ResolvedInputs& in_;
  std::vector<std::string> files_;
};

inline std::string counts_text(const RankCounts& counts) {
  std::ostringstream os;
  write_counts(os, counts);
  return os.str();
}

inline ReportOptions report_options(const json& c, std::size_t states) {
  ReportOptions o;
  if (!c.contains("report")) return o;
  const auto& r = c["report"];
  cfg::allow_keys(r, {"component", "max_lag", "exact_cap"}, "config.report");
  const auto comp = cfg::count(r, "component", 1, "config.report");
  if (comp < 1 || comp > states) throw ConfigError("config.report.component out of range");
  o.component = PermIndex(comp);
  o.max_lag = cfg::count(r, "max_lag", o.max_lag, "config.report");
  return o;
}

inline std::size_t exact_cap(const json& c) {
  return c.contains("report") ? cfg::count(c["report"], "exact_cap", 10000, "config.report") : 10000;
}

inline std::optional<ExactPosteriorPi> maybe_exact(const Model& model, std::size_t cap) {
  try {
    return exact_posterior_pi(model, cap);
  } catch (const ConfigError&) {
    return std::nullopt;  // state space too large for enumeration
  }
}

/// Event {item at position} or {ranking = r1..rp} in every listed category;
/// unlisted categories are unconstrained. Items and positions are 1-based,
/// as in the rank columns of a dataset.
inline RankEvent config_event(const json& e, const Model& model, const std::string& where) {
  cfg::allow_keys(e, {"item", "rank", "ranking", "categories"}, where);
  const auto p = static_cast<std::size_t>(model.tables().items());
  std::vector<bool> mask(model.states());
  if (e.contains("ranking")) {
    if (e.contains("item") || e.contains("rank")) throw ConfigError(where + ": give either ranking or item and rank");
    std::vector<int> word;
    try {
      word = e.at("ranking").get<std::vector<int>>();
    } catch (const json::exception&) {
      throw ConfigError(where + ".ranking: expected an array of ranks");
    }
    if (word.size() != p) throw ConfigError(where + ".ranking: expected " + std::to_string(p) + " ranks");
    std::optional<Permutation> w;
    try {
      w.emplace(word);
    } catch (const std::invalid_argument&) {
      throw ConfigError(where + ".ranking: not a permutation");
    }
    mask[rank(*w).offset()] = true;
  } else {
    const auto item = cfg::count(e, "item", 0, where);
    const auto position = cfg::count(e, "rank", 0, where);
    if (item < 1 || item > p) throw ConfigError(where + ".item out of range");
    if (position < 1 || position > p) throw ConfigError(where + ".rank out of range");
    for (std::size_t k = 0; k < mask.size(); ++k) {
      mask[k] = model.tables().word(PermIndex::from_offset(k)).images()[item - 1] == static_cast<int>(position);
    }
  }
  std::vector<std::vector<bool>> masks(model.categories(), std::vector<bool>(model.states(), true));
  if (e.contains("categories")) {
    for (auto c : cfg::get<std::vector<std::size_t>>(e, "categories", {}, where)) {
      if (c < 1 || c > model.categories()) throw ConfigError(where + ".categories: category out of range");
      masks[c - 1] = mask;
    }
  } else {
    masks.assign(model.categories(), mask);
  }
  return RankEvent(std::move(masks));
}

struct NamedEvent {
  std::string name;
  RankEvent event;
  std::optional<RankEvent> given;
};

/// The "events" list; parsed before any sampling so errors surface early.
inline std::vector<NamedEvent> config_events(const json& c, const Model& model) {
  std::vector<NamedEvent> out;
  if (!c.contains("events")) return out;
  const auto& events = c["events"];
  if (!events.is_array()) throw ConfigError("config.events: expected an array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string where = "config.events[" + std::to_string(i) + "]";
    const auto& e = events[i];
    if (!e.is_object()) throw ConfigError(where + ": expected an object");
    json body = e;
    body.erase("name");
    body.erase("given");
    NamedEvent ne{cfg::require<std::string>(e, "name", where), config_event(body, model, where), std::nullopt};
    if (e.contains("given")) ne.given = config_event(e["given"], model, where + ".given");
    out.push_back(std::move(ne));
  }
  return out;
}

inline void check_top_keys(const json& c, std::initializer_list<const char*> extra, const std::string& command) {
  std::vector<const char*> base = {"seed", "output", "counts", "counts_file", "data", "hyper", "prior"};
  for (const char* e : extra) base.push_back(e);
  for (const auto& [key, value] : c.items()) {
    bool ok = false;
    for (const char* a : base) ok = ok || key == a;
    if (!ok) throw ConfigError("config: key '" + key + "' is not used by '" + command + "'");
  }
}

// ---------------------------------------------------------------- commands

inline void cmd_simulate(const ResolvedInputs& in) {
  const auto& c = in.config;
  check_top_keys(c, {"simulate"}, "simulate");
  const auto& s = c.contains("simulate") ? c["simulate"] : throw ConfigError("config: missing 'simulate'");
  cfg::allow_keys(s, {"items", "pi_true", "theta_true", "lambda_true", "b"}, "config.simulate");
  const int p = cfg::require<int>(s, "items", "config.simulate");
  if (p < 1 || p > kDefaultMaxItems) throw ConfigError("config.simulate.items out of range");
  const auto tables = tables_for(p);
  const auto pi = rank_list(cfg::require<json>(s, "pi_true", "config.simulate"), tables->size(), "config.simulate.pi_true");
  const auto b = cfg::require<std::vector<std::int64_t>>(s, "b", "config.simulate");
  if (b.size() != pi.size()) throw ConfigError("config.simulate: b and pi_true differ in length");
  std::optional<ThetaVector> theta;
  if (s.contains("theta_true") == s.contains("lambda_true")) {
    throw ConfigError("config.simulate: give exactly one of theta_true, lambda_true");
  }
  try {
    if (s.contains("theta_true")) theta.emplace(cfg::require<std::vector<double>>(s, "theta_true", "config.simulate"));
    else theta.emplace(ThetaVector::exponential_family(cfg::require<double>(s, "lambda_true", "config.simulate"), *tables));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.simulate: ") + e.what());
  }
  if (theta->size() != tables->size()) throw ConfigError("config.simulate.theta_true needs p! entries");
  for (auto v : b)
    if (v < 0) throw ConfigError("config.simulate.b: negative sample size");
  const auto counts = simulate_data(CentralRanks(pi), *theta, b, in.seed, *tables);
  Artifacts art(in.out, "simulate", in);
  art.text("counts.csv", counts_text(counts));
  art.finish();
}

inline void cmd_chains(const ResolvedInputs& in, bool gibbs) {
  const auto& c = in.config;
  const std::string name = gibbs ? "gibbs" : "sandwich";
  check_top_keys(c, {"chain", "report", "events"}, name);
  const Model model = config_model(c);
  const json chain_json = c.contains("chain") ? c["chain"] : json();
  ChainConfig cc = cfg::chain(chain_json, in.seed, "config.chain", gibbs ? Kernel::gibbs : Kernel::sandwich_uniform);
  if (gibbs && cc.kernel != Kernel::gibbs) throw ConfigError("config.chain.kernel: 'gibbs' command runs the gibbs kernel");
  if (!gibbs && cc.kernel == Kernel::gibbs) throw ConfigError("config.chain.kernel: use the 'gibbs' command");
  const std::size_t n = chain_json.is_object() ? cfg::count(chain_json, "chains", 1, "config.chain") : 1;
  if (n == 0) throw ConfigError("config.chain.chains must be positive");
  std::vector<ChainInit> inits;
  if (chain_json.is_object() && chain_json.contains("init")) {
    const auto& init = chain_json["init"];
    cfg::allow_keys(init, {"pi"}, "config.chain.init");
    const auto pi = rank_list(cfg::require<json>(init, "pi", "config.chain.init"), model.states(), "config.chain.init.pi");
    if (pi.size() != model.categories()) throw ConfigError("config.chain.init.pi: one rank per category required");
    inits.assign(n, ChainInit{CentralRanks(pi), std::nullopt});
  }
  const auto events = config_events(c, model);
  const auto traces = run_chains(cc, model, n, inits);
  const auto exact = maybe_exact(model, exact_cap(c));
  const auto opt = report_options(c, model.states());

  Artifacts art(in.out, name, in);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::ostringstream os;
    write_trace(os, traces[i]);
    art.text("trace_" + std::to_string(i + 1) + ".csv", os.str());
  }
  Summary sum;
  sum.set("kernel", to_string(cc.kernel));
  sum.set("chains", n);
  sum.set("retained_per_chain", traces[0].size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    sum.set("acceptance_rate." + std::to_string(i + 1), traces[i].acceptance_rate());
  }
  const ConditionalTable table(traces[0], model);
  for (std::size_t j = 0; j < model.categories(); ++j) {
    const auto exact_j = exact ? exact->marginal(j) : std::vector<double>{};
    for (std::size_t k = 1; k <= model.states(); ++k) {
      const auto e = rb_marginal(table, j, PermIndex(k));
      const std::string key = "rb.category" + std::to_string(j + 1) + ".rank" + std::to_string(k);
      sum.set(key + ".estimate", e.value);
      sum.set(key + ".se", e.se);
      if (exact) sum.set(key + ".exact", exact_j[k - 1]);
    }
  }
  for (const auto& e : events) {
    const auto est = e.given ? rb_conditional(table, e.event, *e.given) : rb_joint(table, e.event);
    sum.set("event." + e.name + ".estimate", est.value);
    sum.set("event." + e.name + ".se", est.se);
  }
  art.text("summary.txt", sum.to_text());
  art.text("report.txt", make_report(traces, opt, exact ? &*exact : nullptr).to_text());
  art.finish();
}

inline void cmd_diagnose(const ResolvedInputs& in, const CliOptions& cli) {
  // The stored run is named by --data (or "run" in the config); its manifest
  // supplies the model and report settings.
  std::filesystem::path run;
  if (cli.data) run = *cli.data;
  else if (in.config.contains("run")) run = cfg::get<std::string>(in.config, "run", "", "config");
  else throw ConfigError("diagnose: name the stored run directory with --data or \"run\"");
  const auto manifest_path = run / "manifest.json";
  json manifest;
  {
    std::ifstream f(manifest_path);
    if (!f) throw DataError("cannot open " + manifest_path.string());
    try {
      f >> manifest;
    } catch (const json::exception& e) {
      throw DataError(manifest_path.string() + ": " + e.what());
    }
  }
  const json stored = manifest.at("config");
  const Model model = config_model(stored);
  std::vector<ChainTrace> traces;
  for (const auto& f : manifest.at("files")) {
    const auto name = f.get<std::string>();
    if (name.rfind("trace_", 0) == 0) traces.push_back(load_trace(run / name));
  }
  if (traces.empty()) throw DataError(run.string() + ": no traces in the manifest");
  const auto exact = maybe_exact(model, exact_cap(stored));
  const auto report = make_report(traces, report_options(stored, model.states()), exact ? &*exact : nullptr);
  ResolvedInputs rec = in;
  rec.config["run"] = std::filesystem::absolute(run).lexically_normal().string();
  Artifacts art(in.out, "diagnose", rec);
  art.text("report.txt", report.to_text());
  art.finish();
}

inline void cmd_em(const ResolvedInputs& in) {
  const auto& c = in.config;
  check_top_keys(c, {"em"}, "em");
  const Model model = config_model(c);
  EmConfig ec;
  ec.inner_chain.seed = in.seed;
  ec.final_chain.seed = in.seed + 1;
  if (c.contains("em")) {
    const auto& e = c["em"];
    cfg::allow_keys(e, {"lambda0", "scale", "max_iters", "plateau_window", "plateau_range", "inner", "inner_chains",
                        "final", "search"},
                    "config.em");
    ec.lambda0 = cfg::get<double>(e, "lambda0", ec.lambda0, "config.em");
    ec.scale = cfg::get<double>(e, "scale", ec.scale, "config.em");
    ec.max_iters = cfg::count(e, "max_iters", ec.max_iters, "config.em");
    ec.plateau_window = cfg::count(e, "plateau_window", ec.plateau_window, "config.em");
    ec.plateau_range = cfg::get<double>(e, "plateau_range", ec.plateau_range, "config.em");
    ec.inner_chains = cfg::count(e, "inner_chains", ec.inner_chains, "config.em");
    if (e.contains("inner")) {
      auto ic = cfg::chain(e["inner"], in.seed, "config.em.inner", ec.inner_chain.kernel);
      if (e["inner"].contains("chains")) throw ConfigError("config.em.inner: use em.inner_chains");
      ec.inner_chain = ic;
    }
    if (e.contains("final")) ec.final_chain = cfg::chain(e["final"], in.seed + 1, "config.em.final", ec.final_chain.kernel);
    if (e.contains("search")) {
      const auto s = cfg::get<std::vector<double>>(e, "search", {}, "config.em");
      if (s.size() != 2) throw ConfigError("config.em.search: expected [lo, hi]");
      ec.search_lo = s[0];
      ec.search_hi = s[1];
    }
  }
  if (ec.inner_chain.kernel == Kernel::gibbs || ec.final_chain.kernel == Kernel::gibbs) {
    throw ConfigError("config.em: inner and final chains must use a sandwich kernel");
  }
  const auto res = em_run(ec, model);
  Artifacts art(in.out, "em", in);
  std::ostringstream traj;
  traj << "iteration,lambda,inner_size\n";
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    traj << k << "," << format_double(res.trajectory[k]) << "," << res.inner_sizes[k] << "\n";
  }
  art.text("em_trajectory.csv", traj.str());
  Summary s;
  s.set("lambda_hat", res.lambda_hat);
  s.set("se", res.se);
  s.set("information", res.information);
  s.set("information_positive", res.information_positive);
  s.set("plateau_reached", res.plateau_reached);
  s.set("boundary", res.boundary);
  s.set("iterations", res.trajectory.size() - 1);
  for (std::size_t i = 0; i < res.elogtheta.size(); ++i) s.set("elogtheta." + std::to_string(i + 1), res.elogtheta[i]);
  art.text("lambda_hat.txt", s.to_text());
  art.finish();
  if (!res.information_positive) throw NumericalError("information not positive; increase final chain length");
}

inline void cmd_oracle(const ResolvedInputs& in) {
  const auto& c = in.config;
  check_top_keys(c, {"oracle"}, "oracle");
  const Model model = config_model(c);
  json o = c.contains("oracle") ? c["oracle"] : json::object();
  cfg::allow_keys(o, {"enumeration_cap", "kernel_cap", "mc_draws"}, "config.oracle");
  KernelOptions ko;
  ko.cap = cfg::count(o, "kernel_cap", ko.cap, "config.oracle");
  ko.mc_draws = cfg::count(o, "mc_draws", ko.mc_draws, "config.oracle");
  ko.mc_seed = in.seed;
  const auto post = exact_posterior_pi(model, cfg::count(o, "enumeration_cap", kDefaultEnumerationCap, "config.oracle"));
  Artifacts art(in.out, "oracle", in);
  Summary s;
  {
    std::ostringstream os;
    os << "state,probability\n";
    for (std::size_t t = 0; t < post.probs.size(); ++t) {
      os << state_label(post.space, t) << "," << format_double(post.probs[t]) << "\n";
    }
    art.text("posterior_pi.csv", os.str());
    const auto mode = static_cast<std::size_t>(std::max_element(post.probs.begin(), post.probs.end()) - post.probs.begin());
    s.set("states", post.space.size());
    s.set("mode", state_label(post.space, mode));
    s.set("mode_probability", post.probs[mode]);
  }
  if (post.space.size() <= ko.cap) {
    bool uniform_prior = true;
    for (std::size_t j = 0; j < model.categories(); ++j)
      for (double v : model.prior().pmf(j)) uniform_prior = uniform_prior && v == model.prior().pmf(j)[0];
    const bool closed_form = model.tables().items() == 2 && model.categories() == 2 && uniform_prior;
    const auto k = closed_form ? build_K_pi(model) : build_K_pi_general(model, ko);
    s.set("K_pi.construction", std::string(closed_form ? "closed_form_quadrature" :
                                           model.tables().items() == 2 ? "quadrature" : "monte_carlo"));
    std::ostringstream ks;
    write_matrix(ks, k);
    art.text("K_pi.csv", ks.str());
    const auto r = build_R(post, model.tables());
    std::ostringstream rs;
    write_matrix(rs, r);
    art.text("R.csv", rs.str());
    s.set("R.idempotence_deviation", (r.entries * r.entries).max_abs_diff(r.entries));
    if (closed_form) {
      s.set("sojourn_state3", 1.0 / (1.0 - k(2, 2)));
      s.set("exit_state3_to_state4", k(2, 3) / (1.0 - k(2, 2)));
    }
    bool positive = true;
    for (double v : post.probs) positive = positive && v > 0.0;
    if (positive) {
      const auto cmp = sandwich_spectrum_compare(k, r, post.probs);
      std::ostringstream sp;
      sp << "index,rho,rho_tilde\n";
      for (std::size_t i = 0; i < cmp.rho.size(); ++i) {
        sp << i + 1 << "," << format_double(cmp.rho[i]) << "," << format_double(cmp.rho_tilde[i]) << "\n";
      }
      art.text("spectra.csv", sp.str());
      s.set("second_eigenvalue", cmp.rho.size() > 1 ? cmp.rho[1] : 0.0);
      s.set("second_eigenvalue_sandwich", cmp.rho_tilde.size() > 1 ? cmp.rho_tilde[1] : 0.0);
      s.set("dominance_holds", cmp.dominated());
    } else {
      s.set("spectra", std::string("skipped: posterior has zero-probability states"));
    }
  } else {
    s.set("K_pi", std::string("skipped: state space exceeds kernel_cap"));
  }
  art.text("summary.txt", s.to_text());
  art.finish();
}

}  // namespace detail

/// Runs one command; throws the library's error types on failure.
inline void run(const std::string& command, const CliOptions& opt) {
  const auto in = resolve(opt);
  if (command == "simulate") detail::cmd_simulate(in);
  else if (command == "gibbs") detail::cmd_chains(in, true);
  else if (command == "sandwich") detail::cmd_chains(in, false);
  else if (command == "em") detail::cmd_em(in);
  else if (command == "oracle") detail::cmd_oracle(in);
  else if (command == "diagnose") detail::cmd_diagnose(in, opt);
  else throw ConfigError("unknown command '" + command + "'");
}

/// Exit status of a command: 0 success, 2 configuration error, 3 data
/// error, 4 numerical failure, 1 anything else. Errors go to `err`.
inline int run_command(const std::string& command, const CliOptions& opt, std::ostream& err = std::cerr) {
  try {
    run(command, opt);
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rankda
