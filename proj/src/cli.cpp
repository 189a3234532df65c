#include "uniconv/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>

#include "uniconv/errors.hpp"
#include "uniconv/funcspace.hpp"
#include "uniconv/haar.hpp"
#include "uniconv/homeo.hpp"
#include "uniconv/parallel.hpp"
#include "uniconv/rh.hpp"

namespace uniconv::cli {

using json = nlohmann::ordered_json;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string k_policy_text(const signsolver::KPolicy& p) {
  if (p.kind == signsolver::KPolicy::Kind::kFixed) return "fixed:" + std::to_string(p.fixed_k);
  std::ostringstream os;
  os.precision(17);
  os << "paper:" << p.c4;
  return os.str();
}

// Where the results of one subcommand go: a directory with the resolved
// config and a manifest, or stdout when no directory was given.
class Output {
 public:
  Output(const RunConfig& config, std::vector<std::string> inputs) : config_(config), inputs_(std::move(inputs)) {
    if (!config.out.empty()) std::filesystem::create_directories(config.out);
  }

  bool to_directory() const { return !config_.out.empty(); }

  void write(const std::string& name, const std::string& body) {
    if (!to_directory()) {
      std::cout << body;
      return;
    }
    const auto path = std::filesystem::path(config_.out) / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("cannot write '" + path.string() + "'");
    f << body;
    outputs_[name] = checksum(body);
  }

  void finish() {
    if (!to_directory()) return;
    const std::string config_text = to_json(config_).dump(2) + "\n";
    write("config.json", config_text);
    json m;
    m["version"] = kVersion;
    m["command"] = config_.command;
    m["seed"] = config_.reduction.seed;
    json in = json::object();
    for (const auto& path : inputs_) {
      if (path.empty()) continue;
      in[path] = std::filesystem::is_regular_file(path) ? checksum(read_bytes(path)) : checksum(path);
    }
    m["inputs"] = std::move(in);
    json out = json::object();
    for (const auto& [name, sum] : outputs_) out[name] = sum;
    m["outputs"] = std::move(out);
    std::ofstream f(std::filesystem::path(config_.out) / "manifest.json", std::ios::binary | std::ios::trunc);
    f << m.dump(2) << '\n';
  }

 private:
  const RunConfig& config_;
  std::vector<std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

homeo::DyadicField read_field_csv(const std::string& path, int depth, double fill) {
  homeo::DyadicField field = homeo::DyadicField::constant(depth, fill);
  std::istringstream in(read_bytes(path));
  std::string line;
  std::getline(in, line);
  if (line != "k,n,value") throw DomainError("'" + path + "' must start with the header k,n,value");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    DyadicRational d{};
    double v = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> d.k >> c1 >> d.n >> c2 >> v) || c1 != ',' || c2 != ',' || !d.valid()) {
      throw DomainError("bad row '" + line + "' in '" + path + "'");
    }
    if (d.n > depth) throw DomainError("row '" + line + "' is deeper than --depth");
    field[d] = v;
  }
  return field;
}

double resolve_eta(double requested, const haar::HaarTable& table) {
  if (requested > 0.0) return requested;
  const double bound = homeo::admissible_eta_bound(table);
  return std::isinf(bound) ? 1.0 : bound;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int cmd_haar(const RunConfig& c) {
  const auto f = funcspace::FunctionSpec::parse(c.function);
  const int depth = c.reduction.depth;
  const auto table = haar::haar_coefficients(f, depth);
  std::ostringstream q;
  q << "d_k,d_n,q\n";
  for (int n = 1; n <= depth + 1; ++n) {
    for (std::int64_t k = 1; k < (std::int64_t{1} << n); k += 2) {
      q << k << ',' << n << ',' << csv_number(table.q(DyadicRational{k, n})) << '\n';
    }
  }
  const auto tail = haar::tail_statistics(table, depth, c.grid);
  std::ostringstream t;
  t << "lambda,measure\n";
  for (const auto& [lambda, measure] : tail.ladder) t << csv_number(lambda) << ',' << csv_number(measure) << '\n';
  Output out(c, {c.function});
  out.write("q.csv", q.str());
  if (!out.to_directory()) std::cout << '\n';
  out.write("tail.csv", t.str());
  out.finish();
  return 0;
}

int cmd_build(const RunConfig& c) {
  const int depth = c.reduction.depth;
  if (c.theta_file.empty() == c.tau_file.empty()) throw DomainError("build needs exactly one of --theta-file, --tau-file");
  homeo::ThetaMap theta;
  if (!c.theta_file.empty()) {
    theta = read_field_csv(c.theta_file, depth, 0.5);
  } else {
    const auto f = funcspace::FunctionSpec::parse(c.function);
    const auto table = haar::haar_coefficients(f, depth - 1);
    theta = homeo::theta_from_tau(table, read_field_csv(c.tau_file, depth, 0.0), resolve_eta(c.reduction.eta, table));
  }
  const auto h = homeo::build_psi_inverse(theta, depth);
  std::ostringstream os;
  homeo::write_homeo_csv(os, h);
  Output out(c, {c.function, c.theta_file, c.tau_file});
  out.write("phi.csv", os.str());
  out.finish();
  return 0;
}

int cmd_signs(const RunConfig& c) {
  if (c.instance_file.empty()) throw DomainError("signs needs --instance");
  std::istringstream in(read_bytes(c.instance_file));
  const auto inst = read_instance_json(in);
  signsolver::SolverParams params = c.reduction.solver;
  params.seed = c.reduction.seed;
  params.threads = c.reduction.threads;
  const auto sol = c.reduction.solver_kind == reducer::SolverKind::kGreedy ? signsolver::solve_signs_greedy(inst, params)
                                                                           : signsolver::solve_signs(inst, params);
  json j;
  j["signs"] = sol.signs;
  j["value"] = sol.value;
  j["beta"] = params.beta;
  j["argmax_entry"] = sol.argmax_entry;
  auto by_b = json::array();
  for (const auto& [b, row] : signsolver::achieved_by_b(inst, sol.signs)) {
    by_b.push_back({{"b", b}, {"max_abs_sum", row.first}, {"entries", row.second}});
  }
  j["achieved_by_b"] = std::move(by_b);
  auto levels = json::array();
  for (const auto& l : sol.levels) {
    levels.push_back({{"level", l.level},
                      {"n", l.n},
                      {"K", l.K},
                      {"sigma", l.sigma},
                      {"attempts", l.total_attempts},
                      {"hypotheses_hold", l.instance.valid}});
  }
  j["levels"] = std::move(levels);
  Output out(c, {c.instance_file});
  out.write("signs.json", j.dump(2) + "\n");
  out.finish();
  return 0;
}

int cmd_eval_field(const RunConfig& c) {
  if (c.restrictor_file.empty()) throw DomainError("eval-field needs --restrictor");
  if (c.points < 1) throw DomainError("--points must be positive");
  std::istringstream in(read_bytes(c.restrictor_file));
  const auto r = rh::read_restrictor_json(in);
  const auto f = funcspace::FunctionSpec::parse(c.function);
  const auto table = haar::haar_coefficients(f, r.depth - 1);
  std::vector<double> xs(static_cast<std::size_t>(c.points));
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(c.points);
  const auto est = rh::expectation_field(f, table, r, resolve_eta(c.reduction.eta, table), xs, c.reduction.mc_samples,
                                         c.reduction.seed, c.reduction.threads);
  std::ostringstream os;
  os << "x,mean,stderr\n";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    os << csv_number(xs[k]) << ',' << csv_number(est[k].mean) << ',' << csv_number(est[k].std_error) << '\n';
  }
  Output out(c, {c.function, c.restrictor_file});
  out.write("field.csv", os.str());
  out.finish();
  return 0;
}

int cmd_reduce(const RunConfig& c) {
  const auto f = funcspace::FunctionSpec::parse(c.function);
  if (c.out.empty()) throw DomainError("reduce needs --out");
  Output out(c, {c.function});
  const auto checkpoint = [&](const reducer::PipelineResult& partial) {
    std::ostringstream os;
    reducer::write_reports_json(os, partial);
    out.write("reports.json", os.str());
  };
  reducer::PipelineResult res;
  try {
    res = reducer::run_pipeline(f, c.reduction, checkpoint);
  } catch (...) {
    out.finish();
    throw;
  }
  checkpoint(res);
  std::ostringstream phi;
  homeo::write_homeo_csv(phi, res.phi);
  out.write("phi.csv", phi.str());
  std::ostringstream restrictor;
  rh::write_restrictor_json(restrictor, res.restrictor);
  out.write("restrictor.json", restrictor.str());
  std::ostringstream eval;
  reducer::write_eval_csv(eval, reducer::evaluate_result(f, res.phi, c.reduction.u_max, c.grid, c.reduction.r_per_u));
  out.write("eval.csv", eval.str());
  out.finish();
  return 0;
}

int cmd_eval(const RunConfig& c) {
  if (c.phi_file.empty()) throw DomainError("eval needs --phi");
  std::istringstream in(read_bytes(c.phi_file));
  const auto phi = homeo::read_homeo_csv(in);
  const auto f = funcspace::FunctionSpec::parse(c.function);
  std::ostringstream os;
  reducer::write_eval_csv(os, reducer::evaluate_result(f, phi, c.reduction.u_max, c.grid, c.reduction.r_per_u));
  Output out(c, {c.function, c.phi_file});
  out.write("eval.csv", os.str());
  out.finish();
  return 0;
}

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Check> core_suite(int threads) {
  std::vector<Check> out;
  {
    double worst = 0.0;
    const int nodes = 1 << 12;
    for (std::int64_t r : {0, 1, 7, 64}) {
      double acc = 0.0;
      for (int k = 0; k < nodes; ++k) acc += funcspace::dirichlet_kernel(r, (k + 0.5) / nodes);
      worst = std::max(worst, std::abs(acc / nodes - 1.0));
    }
    out.push_back({"kernel integral", worst <= 1e-10, "max |int D_r - 1| = " + csv_number(worst)});
  }
  {
    const auto h = homeo::build_psi_inverse(homeo::DyadicField::constant(10, 0.5), 10);
    double worst = 0.0;
    for (std::size_t k = 0; k < h.inverse_breakpoints().size(); ++k) {
      worst = std::max(worst, std::abs(h.inverse_breakpoints()[k] - std::ldexp(static_cast<double>(k), -10)));
    }
    out.push_back({"midpoint homeomorphism is the identity", worst == 0.0, "max deviation " + csv_number(worst)});
  }
  {
    const auto table = haar::haar_coefficients(funcspace::FunctionSpec::constant(0.7), 6);
    double worst = 0.0;
    for (std::size_t h = 1; h < table.coefficients().size(); ++h) worst = std::max(worst, std::abs(table.coefficients()[h]));
    out.push_back({"constant has no Haar coefficients", worst == 0.0 && table.sup_q() == 0.0, csv_number(worst)});
  }
  {
    const auto table = haar::haar_coefficients(funcspace::FunctionSpec::standard(), 5);
    const auto rep = rh::martingale_check(table, rh::RHRestrictor::unrestricted(6), homeo::admissible_eta_bound(table),
                                          4000, 11, threads);
    out.push_back({"martingale identity", rep.pass, "max z " + csv_number(rep.max_z)});
  }
  {
    const auto inst = signsolver::make_structured_instance(3, 12, 2.0, 2.0, 1.0);
    signsolver::SolverParams p;
    p.threads = threads;
    bool ok = true;
    std::string detail;
    try {
      const auto sol = signsolver::solve_signs(inst, p);
      ok = std::isfinite(sol.value);
      detail = "value " + csv_number(sol.value);
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    out.push_back({"sign solver", ok, detail});
  }
  {
    reducer::ReductionConfig rc;
    rc.depth = 6;
    rc.u_max = 3;
    rc.m_max = 1;
    rc.delta_min = 0.3;
    rc.mc_samples = 64;
    rc.threads = threads;
    const auto f = funcspace::FunctionSpec::constant(0.3);
    const auto res = reducer::run_pipeline(f, rc);
    double worst = 0.0;
    for (std::size_t k = 0; k < res.phi.inverse_breakpoints().size(); ++k) {
      worst = std::max(worst, std::abs(res.phi.inverse_breakpoints()[k] - std::ldexp(static_cast<double>(k), -6)));
    }
    out.push_back({"constant reduces to the identity", worst == 0.0, "max deviation " + csv_number(worst)});
  }
  return out;
}

int cmd_verify(const RunConfig& c) {
  if (c.suite != "core") throw DomainError("unknown suite '" + c.suite + "' (only core exists)");
  bool all = true;
  std::ostringstream os;
  for (const auto& check : core_suite(c.reduction.threads)) {
    os << (check.pass ? "ok    " : "FAIL  ") << check.name << "  (" << check.detail << ")\n";
    all = all && check.pass;
  }
  Output out(c, {});
  out.write("verify.txt", os.str());
  out.finish();
  return all ? 0 : static_cast<int>(ExitCode::kDomain);
}

// --config is applied before any other flag so that flags override it.
std::string find_config_flag(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  return {};
}

}  // namespace

signsolver::KPolicy parse_k_policy(const std::string& text) {
  if (text == "paper") return signsolver::KPolicy::paper();
  try {
    if (text.starts_with("paper:")) return signsolver::KPolicy::paper(std::stod(text.substr(6)));
    if (text.starts_with("fixed:")) {
      const long long k = std::stoll(text.substr(6));
      if (k < 2) throw DomainError("fixed block size must be at least 2");
      return signsolver::KPolicy::fixed(k);
    }
  } catch (const std::logic_error&) {
  }
  throw DomainError("bad k policy '" + text + "' (expected paper, paper:C4 or fixed:K)");
}

std::string checksum(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const RunConfig& c) {
  const auto& r = c.reduction;
  json j;
  j["command"] = c.command;
  j["function"] = c.function;
  j["seed"] = r.seed;
  j["depth"] = r.depth;
  j["eta"] = r.eta;
  j["u_max"] = r.u_max;
  j["m_max"] = r.m_max;
  j["delta_min"] = r.delta_min;
  j["mc_samples"] = r.mc_samples;
  j["precision_fraction"] = r.precision_fraction;
  j["r_per_u"] = r.r_per_u;
  j["xi_cap"] = r.xi_cap;
  j["two_path"] = r.two_path;
  j["solver"] = {{"kind", reducer::to_string(r.solver_kind)},
                 {"alpha", r.solver.alpha},
                 {"beta", r.solver.beta},
                 {"k_policy", k_policy_text(r.solver.k_policy)},
                 {"sigma_scale", r.solver.sigma_scale},
                 {"max_retries", r.solver.max_retries},
                 {"c2", r.solver.c2},
                 {"block_polish", r.solver.block_polish}};
  j["grid"] = c.grid;
  j["points"] = c.points;
  j["theta_file"] = c.theta_file;
  j["tau_file"] = c.tau_file;
  j["instance_file"] = c.instance_file;
  j["restrictor_file"] = c.restrictor_file;
  j["phi_file"] = c.phi_file;
  j["suite"] = c.suite;
  j["out"] = c.out;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  try {
    RunConfig c;
    auto& r = c.reduction;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("command", c.command);
    get("function", c.function);
    get("seed", r.seed);
    get("depth", r.depth);
    get("eta", r.eta);
    get("u_max", r.u_max);
    get("m_max", r.m_max);
    get("delta_min", r.delta_min);
    get("mc_samples", r.mc_samples);
    get("precision_fraction", r.precision_fraction);
    get("r_per_u", r.r_per_u);
    get("xi_cap", r.xi_cap);
    get("two_path", r.two_path);
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      if (s.contains("kind")) r.solver_kind = reducer::solver_kind_from_string(s.at("kind").get<std::string>());
      if (s.contains("alpha")) s.at("alpha").get_to(r.solver.alpha);
      if (s.contains("beta")) s.at("beta").get_to(r.solver.beta);
      if (s.contains("k_policy")) {
        c.k_policy = s.at("k_policy").get<std::string>();
        r.solver.k_policy = parse_k_policy(c.k_policy);
      }
      if (s.contains("sigma_scale")) s.at("sigma_scale").get_to(r.solver.sigma_scale);
      if (s.contains("max_retries")) s.at("max_retries").get_to(r.solver.max_retries);
      if (s.contains("c2")) s.at("c2").get_to(r.solver.c2);
      if (s.contains("block_polish")) s.at("block_polish").get_to(r.solver.block_polish);
    }
    get("grid", c.grid);
    get("points", c.points);
    get("theta_file", c.theta_file);
    get("tau_file", c.tau_file);
    get("instance_file", c.instance_file);
    get("restrictor_file", c.restrictor_file);
    get("phi_file", c.phi_file);
    get("suite", c.suite);
    get("out", c.out);
    return c;
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad run config: ") + e.what());
  }
}

signsolver::SignInstance read_instance_json(std::istream& in) {
  try {
    const auto j = json::parse(in);
    signsolver::SignInstance inst;
    inst.n = j.at("n").get<std::int64_t>();
    inst.gamma = j.value("gamma", 0.0);
    inst.M = j.value("M", 2.0);
    for (const auto& e : j.at("entries")) {
      signsolver::SignEntry entry;
      entry.j = e.value("j", static_cast<std::int64_t>(inst.entries.size()));
      entry.l = e.at("l").get<std::int64_t>();
      entry.b = e.value("b", std::int64_t{1});
      entry.values = e.at("values").get<std::vector<double>>();
      if (static_cast<std::int64_t>(entry.values.size()) != inst.n) {
        throw DomainError("entry " + std::to_string(entry.j) + " has " + std::to_string(entry.values.size()) +
                          " values, expected n = " + std::to_string(inst.n));
      }
      inst.entries.push_back(std::move(entry));
    }
    return inst;
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad instance JSON: ") + e.what());
  }
}

void write_instance_json(std::ostream& out, const signsolver::SignInstance& inst) {
  json j;
  j["n"] = inst.n;
  j["gamma"] = inst.gamma;
  j["M"] = inst.M;
  auto entries = json::array();
  for (const auto& e : inst.entries) entries.push_back({{"j", e.j}, {"l", e.l}, {"b", e.b}, {"values", e.values}});
  j["entries"] = std::move(entries);
  out << j.dump() << '\n';
}

int run_cli(int argc, char** argv) {
  RunConfig c;
  try {
    if (const auto path = find_config_flag(argc, argv); !path.empty()) {
      c = run_config_from_json(json::parse(read_bytes(path)));
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  }
  auto& r = c.reduction;
  r.threads = default_thread_count();
  std::string solver_kind = reducer::to_string(r.solver_kind);
  c.k_policy = k_policy_text(r.solver.k_policy);

  CLI::App app{"Uniform-convergence change of variables: Haar tables, random homeomorphisms, sign solver and reduction"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Run config JSON; later flags override it");
  app.add_option("--threads", r.threads, "Worker threads (default: UNICONV_THREADS or all cores)")->check(CLI::PositiveNumber);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", r.seed, "Random seed");
    sub->add_option("--out", c.out, "Output directory (stdout when omitted)");
  };
  auto function = [&](CLI::App* sub) {
    sub->add_option("--function", c.function, "Built-in descriptor (const:c, sin:k, cos:k, tent, haar:k:n[:a], cusp[:c], randhaar:seed:levels) or grid CSV path");
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--solver", solver_kind, "hierarchical or greedy")->check(CLI::IsMember({"hierarchical", "greedy"}));
    sub->add_option("--beta", r.solver.beta, "Exponent of b in the bound");
    sub->add_option("--sigma-scale", r.solver.sigma_scale, "Scale of the block acceptance threshold");
    sub->add_option("--k-policy", c.k_policy, "paper, paper:C4 or fixed:K");
    sub->add_option("--max-retries", r.solver.max_retries, "Samples per block before giving up");
  };

  auto* haar_cmd = app.add_subcommand("haar", "Haar coefficients, q on dyadic midpoints and tails of z");
  function(haar_cmd);
  common(haar_cmd);
  haar_cmd->add_option("--depth", r.depth, "Haar depth");
  haar_cmd->add_option("--grid", c.grid, "Exponent of the grid used for the tails of z");

  auto* build_cmd = app.add_subcommand("build", "Build psi^-1 from a theta or tau field");
  function(build_cmd);
  common(build_cmd);
  build_cmd->add_option("--theta-file", c.theta_file, "CSV k,n,value of theta (missing entries are 1/2)");
  build_cmd->add_option("--tau-file", c.tau_file, "CSV k,n,value of tau (missing entries are 0)");
  build_cmd->add_option("--eta", r.eta, "Step size; 0 picks 1/(8 sup q)");
  build_cmd->add_option("--depth", r.depth, "Depth of the homeomorphism");

  auto* signs_cmd = app.add_subcommand("signs", "Choose signs for a vector-balancing instance");
  common(signs_cmd);
  solver(signs_cmd);
  signs_cmd->add_option("--instance", c.instance_file, "Instance JSON {n, gamma, M, entries: [{j, l, b, values}]}")->required();

  auto* field_cmd = app.add_subcommand("eval-field", "Monte-Carlo E f(phi_I(x)) for a restrictor");
  function(field_cmd);
  common(field_cmd);
  field_cmd->add_option("--restrictor", c.restrictor_file, "Restrictor JSON")->required();
  field_cmd->add_option("--eta", r.eta, "Step size; 0 picks 1/(8 sup q)");
  field_cmd->add_option("--samples", r.mc_samples, "Monte-Carlo samples");
  field_cmd->add_option("--points", c.points, "Number of midpoint nodes in [0,1]");

  auto* reduce_cmd = app.add_subcommand("reduce", "Run the full reduction and evaluate the result");
  function(reduce_cmd);
  common(reduce_cmd);
  solver(reduce_cmd);
  reduce_cmd->add_option("--depth", r.depth, "Depth N of the homeomorphism");
  reduce_cmd->add_option("--eta", r.eta, "Step size; 0 picks 1/(8 sup q)");
  reduce_cmd->add_option("--umax", r.u_max, "Largest frequency exponent u");
  reduce_cmd->add_option("--mmax", r.m_max, "Halvings per stage");
  reduce_cmd->add_option("--delta-min", r.delta_min, "Smallest cell scale");
  reduce_cmd->add_option("--samples", r.mc_samples, "Monte-Carlo samples per estimate");
  reduce_cmd->add_option("--precision-fraction", r.precision_fraction, "Allowed stderr relative to the bound scale");
  reduce_cmd->add_option("--r-per-u", r.r_per_u, "r values checked per block (0 = all)");
  reduce_cmd->add_option("--xi-cap", r.xi_cap, "Thin the xi grid above this u");
  reduce_cmd->add_option("--grid", c.grid, "Grid exponent for the evaluation");
  auto* no_two_path = reduce_cmd->add_flag("--no-two-path", "Skip the direct re-estimate of every step");

  auto* eval_cmd = app.add_subcommand("eval", "Fourier partial-sum deviations of f o phi against the identity");
  function(eval_cmd);
  common(eval_cmd);
  eval_cmd->add_option("--phi", c.phi_file, "Homeomorphism CSV k,psi_inv")->required();
  eval_cmd->add_option("--umax", r.u_max, "Largest frequency exponent u");
  eval_cmd->add_option("--grid", c.grid, "Grid exponent");
  eval_cmd->add_option("--r-per-u", r.r_per_u, "r values per block (0 = all)");

  auto* verify_cmd = app.add_subcommand("verify", "Run a built-in invariant suite");
  verify_cmd->add_option("--suite", c.suite, "Suite name")->check(CLI::IsMember({"core"}));
  verify_cmd->add_option("--out", c.out, "Output directory (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (no_two_path->count() > 0) r.two_path = false;
    r.solver_kind = reducer::solver_kind_from_string(solver_kind);
    r.solver.k_policy = parse_k_policy(c.k_policy);
    c.command = app.get_subcommands().front()->get_name();
    if (c.command == "haar") return cmd_haar(c);
    if (c.command == "build") return cmd_build(c);
    if (c.command == "signs") return cmd_signs(c);
    if (c.command == "eval-field") return cmd_eval_field(c);
    if (c.command == "reduce") {
      r.validate();
      return cmd_reduce(c);
    }
    if (c.command == "eval") return cmd_eval(c);
    return cmd_verify(c);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace uniconv::cli
