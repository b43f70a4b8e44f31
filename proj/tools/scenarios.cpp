#include "scenarios.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "reparam/commutation.hpp"
#include "reparam/errors.hpp"
#include "reparam/flows.hpp"
#include "reparam/psi.hpp"

namespace reparam::cli {

using nlohmann::json;

namespace {

json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json stats_json(const IntegrationStats& s) {
  return {{"accepted_steps", s.accepted}, {"rejected_steps", s.rejected}, {"evaluations", s.evaluations}};
}

// Runs fn(0..n-1) on up to `jobs` threads; results are merged by index by the caller.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < n; k += workers) body(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::uint64_t seed_key(const Config& cfg, const std::string& key, std::uint64_t fallback) {
  const long long v = cfg.integer(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError(cfg.where(key) + ": seeds must be non-negative");
  return static_cast<std::uint64_t>(v);
}

Index positive_index(const Config& cfg, const std::string& key, long long fallback = -1) {
  const long long v = fallback < 0 ? cfg.integer(key) : cfg.integer(key, fallback);
  if (v <= 0) throw ConfigError(cfg.where(key) + ": must be a positive integer");
  return static_cast<Index>(v);
}

std::vector<Vector> sample_points(const Parametrization& g, int count, std::uint64_t seed, const Config& cfg) {
  std::mt19937_64 rng(seed);
  const bool orthant = g.domain().kind() == Domain::Kind::positive_orthant;
  std::uniform_real_distribution<double> uniform(cfg.real("checks.sample_lo", 0.1),
                                                 cfg.real("checks.sample_hi", 2.0));
  std::normal_distribution<double> normal(0.0, cfg.real("checks.sample_scale", 1.0));
  std::vector<Vector> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100 * count + 1000) throw ConfigError("could not sample points inside the domain");
    Vector x(g.x_dim());
    for (Index i = 0; i < x.size(); ++i) x[i] = orthant ? uniform(rng) : normal(rng);
    if (g.contains(x)) out.push_back(x);
  }
  return out;
}

std::string file_in(const RunContext& ctx, const std::string& name) {
  return (std::filesystem::path(ctx.out_dir) / name).string();
}

}  // namespace

IntegratorConfig build_integrator(const Config& cfg, IntegratorConfig base) {
  const std::string method = cfg.str("integrator.method", base.method == IntegrationMethod::rk4 ? "rk4" : "dopri54");
  if (method == "dopri54") {
    base.method = IntegrationMethod::dopri54;
  } else if (method == "rk4") {
    base.method = IntegrationMethod::rk4;
  } else {
    throw ConfigError(cfg.where("integrator.method") + ": unknown method '" + method + "' (dopri54, rk4)");
  }
  if (cfg.has("integrator.tolerance")) base.abs_tol = base.rel_tol = cfg.real("integrator.tolerance");
  base.abs_tol = cfg.real("integrator.abs_tol", base.abs_tol);
  base.rel_tol = cfg.real("integrator.rel_tol", base.rel_tol);
  base.fixed_step = cfg.real("integrator.fixed_step", base.fixed_step);
  base.blowup_norm = cfg.real("integrator.blowup_norm", base.blowup_norm);
  base.max_steps = static_cast<std::size_t>(cfg.integer("integrator.max_steps", static_cast<long long>(base.max_steps)));
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("integrator: ") + e.what());
  }
  return base;
}

IntegratorConfig build_integrator(const Config& cfg) { return build_integrator(cfg, IntegratorConfig{}); }

Setup build_setup(const Config& cfg, std::uint64_t seed) {
  const std::string family = cfg.str("parametrization.family");
  std::optional<Parametrization> g;
  if (family == "identity" || family == "square" || family == "u2v2" || family == "factorization_sym" ||
      family == "factorization_asym") {
    BuiltinParams p;
    p.dim = positive_index(cfg, "parametrization.dim");
    p.rank = positive_index(cfg, "parametrization.rank", 1);
    g = builtin(family, p);
  } else if (family == "diagonal_lambda") {
    g = diagonal_lambda(cfg.matrix("parametrization.lambdas"));
  } else if (family == "commuting_quadratic") {
    const std::size_t n = cfg.count_indexed("parametrization.matrices");
    if (n > 0) {
      std::vector<Matrix> matrices;
      for (std::size_t i = 0; i < n; ++i) {
        matrices.push_back(cfg.matrix("parametrization.matrices[" + std::to_string(i) + "]"));
      }
      g = CommutingQuadraticFamily(std::move(matrices)).parametrization();
    } else {
      g = random_commuting_family(positive_index(cfg, "parametrization.x_dim"),
                                  positive_index(cfg, "parametrization.dim"),
                                  seed_key(cfg, "parametrization.family_seed", seed))
              .parametrization();
    }
  } else {
    std::string known;
    for (const auto& name : builtin_families()) known += " " + name;
    throw ConfigError(cfg.where("parametrization.family") + ": unknown family '" + family + "'; known:" + known);
  }
  if (cfg.has("parametrization.coordinates")) {
    std::vector<Index> coords;
    for (long long c : cfg.integers("parametrization.coordinates")) coords.push_back(static_cast<Index>(c));
    g = select_coordinates(*g, coords);
  }

  const Index D = g->x_dim();
  Vector x;
  if (cfg.has("parametrization.init")) {
    x = cfg.vector("parametrization.init");
  } else if (cfg.has("parametrization.init_random")) {
    const Vector range = cfg.vector("parametrization.init_random");
    if (range.size() != 2 || !(range[1] > range[0])) {
      throw ConfigError(cfg.where("parametrization.init_random") + ": expected 'lo, hi' with lo < hi");
    }
    std::mt19937_64 rng(seed_key(cfg, "parametrization.init_seed", seed));
    std::uniform_real_distribution<double> uniform(range[0], range[1]);
    x.resize(D);
    for (Index i = 0; i < D; ++i) x[i] = uniform(rng);
  } else {
    x = Vector::Constant(D, cfg.real("parametrization.init_scale", 1.0));
  }
  if (x.size() != D) {
    throw ConfigError("parametrization.init has " + std::to_string(x.size()) + " entries but " + g->name() +
                      " needs " + std::to_string(D));
  }
  if (!g->contains(x)) throw ConfigError("initialization lies outside the domain of " + g->name());

  Setup setup{family, *g, x, std::nullopt};
  if (g->is_quadratic() && g->commutativity() == Commutativity::commuting) {
    try {
      setup.quadratic = CommutingQuadraticFamily(g->quadratic_forms());
    } catch (const NonCommutingError&) {
    }
  }
  return setup;
}

LegendreFunction build_potential(const Config& cfg, const Setup& setup) {
  std::string kind = cfg.str("potential.kind", "auto");
  const bool selected = cfg.has("parametrization.coordinates");
  if (kind == "auto") {
    if (setup.family == "u2v2" && !selected) {
      kind = "hypentropy";
    } else if (setup.family == "square" && !selected) {
      kind = "entropy";
    } else if (setup.family == "identity" && !selected) {
      kind = "euclidean";
    } else if (setup.quadratic) {
      kind = "numeric-conjugate";
    } else {
      throw ConfigError("no potential is known for family '" + setup.family + "'; set potential.kind");
    }
  }
  const Index d = setup.g.w_dim();
  if (kind == "hypentropy") {
    if (setup.family != "u2v2" || selected) throw ConfigError("potential.kind = hypentropy needs the u2v2 family");
    return hypentropy_from_init(setup.x_init.head(d), setup.x_init.tail(d));
  }
  if (kind == "entropy") {
    if (setup.family != "square" || selected) throw ConfigError("potential.kind = entropy needs the square family");
    return entropy_from_init(setup.x_init);
  }
  if (kind == "euclidean") return euclidean(setup.g(setup.x_init));
  if (kind == "numeric-conjugate") {
    if (!setup.quadratic) throw ConfigError("numeric-conjugate needs a commuting quadratic parametrization");
    return quadratic_family_potential(*setup.quadratic, setup.x_init);
  }
  throw ConfigError(cfg.where("potential.kind") + ": unknown potential '" + kind +
                    "' (auto, hypentropy, entropy, euclidean, numeric-conjugate)");
}

std::optional<RegressionProblem> build_problem(const Config& cfg, Index d, std::uint64_t seed) {
  try {
    if (cfg.has("problem.z")) {
      const Matrix z = cfg.matrix("problem.z");
      const Vector y = cfg.vector("problem.y");
      const std::string layout = cfg.str("problem.layout", "rows");
      if (layout != "rows" && layout != "columns") {
        throw ConfigError(cfg.where("problem.layout") + ": expected rows or columns");
      }
      auto prob = layout == "rows" ? RegressionProblem::from_rows(z, y) : RegressionProblem::from_columns(z, y);
      if (prob.d() != d) throw ConfigError("problem.z has " + std::to_string(prob.d()) + " columns, model needs " + std::to_string(d));
      return prob;
    }
    if (cfg.has("problem.n")) {
      return random_problem(positive_index(cfg, "problem.n"), d, seed_key(cfg, "problem.seed", seed),
                            cfg.boolean("problem.positive", false));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  return std::nullopt;
}

TimeDependentLoss build_loss(const Config& cfg, Index d, const std::optional<RegressionProblem>& problem) {
  const std::size_t n = cfg.count_indexed("loss.segments");
  if (n == 0) {
    if (!problem) throw ConfigError("no loss: define loss.segments[0].type or a problem.* section");
    return TimeDependentLoss(problem->loss());
  }
  std::vector<TimeDependentLoss::Segment> segments;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "loss.segments[" + std::to_string(i) + "].";
    const double start = i == 0 ? cfg.real(p + "start", 0.0) : cfg.real(p + "start");
    const std::string type = cfg.str(p + "type");
    Loss loss;
    if (type == "zero") {
      loss = zero_loss(d);
    } else if (type == "linear") {
      loss = linear_loss(cfg.vector(p + "c"));
    } else if (type == "quadratic") {
      loss = quadratic_loss(cfg.vector(p + "target"));
    } else if (type == "regression") {
      if (!problem) throw ConfigError(cfg.where(p + "type") + ": regression loss needs a problem.* section");
      loss = problem->loss();
    } else {
      throw ConfigError(cfg.where(p + "type") + ": unknown loss type '" + type + "' (zero, linear, quadratic, regression)");
    }
    if (loss.dim != d) {
      throw ConfigError(cfg.where(p + "type") + ": loss dimension " + std::to_string(loss.dim) +
                        " does not match model dimension " + std::to_string(d));
    }
    segments.push_back({start, std::move(loss)});
  }
  try {
    return TimeDependentLoss(std::move(segments));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("loss: ") + e.what());
  }
}

namespace {

CommandOutcome check_commuting(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const Setup setup = build_setup(cfg, ctx.seed);
  const Parametrization& g = setup.g;
  const IntegratorConfig integ = build_integrator(cfg);
  const auto samples = sample_points(g, static_cast<int>(cfg.integer("checks.samples", 100)), ctx.seed, cfg);
  const BracketReport rep = commuting_check(g, samples, cfg.real("checks.tolerance", 1e-8));

  json result;
  result["parametrization"] = g.name();
  result["verdict"] = rep.verdict;
  result["threshold"] = rep.threshold;
  result["samples"] = rep.samples;
  result["max_bracket_norm"] = rep.max_bracket_norm;
  result["coverage"] = rep.coverage;
  json pairs = json::array();
  for (const auto& p : rep.pairs) {
    pairs.push_back({{"i", g.coordinate_name(p.i)}, {"j", g.coordinate_name(p.j)}, {"max_norm", p.max_norm}});
  }
  result["pairs"] = pairs;

  if (cfg.boolean("checks.flow_test", true) && g.w_dim() >= 2) {
    const double s = cfg.real("checks.s", 0.1), t = cfg.real("checks.t", 0.1);
    json flows = json::array();
    for (const auto& p : rep.pairs) {
      json entry{{"i", g.coordinate_name(p.i)}, {"j", g.coordinate_name(p.j)}, {"s", s}, {"t", t}};
      try {
        entry["discrepancy"] = flow_commutation_test(g, setup.x_init, p.i, p.j, s, t, integ);
      } catch (const BlowUpError& e) {
        entry["blow_up"] = e.what();
      }
      flows.push_back(entry);
    }
    result["flow_commutation"] = {{"x", to_json(setup.x_init)}, {"legs", flows}};
  }

  if (cfg.has("checks.depth")) {
    const int depth = static_cast<int>(cfg.integer("checks.depth"));
    try {
      const BracketReport nc = necessary_condition_check(g, setup.x_init, depth, cfg.real("checks.projection_tol", 1e-5));
      json nested = json::array();
      for (const auto& nb : nc.nested) {
        json seq = json::array();
        for (Index j : nb.sequence) seq.push_back(g.coordinate_name(j));
        nested.push_back({{"sequence", seq},
                          {"value", to_json(nb.value)},
                          {"projection", nb.projection},
                          {"gradient_inner", to_json(nb.gradient_inner)}});
      }
      result["necessary_condition"] = {{"verdict", nc.verdict},
                                       {"x", to_json(setup.x_init)},
                                       {"sigma_min", nc.sigma_min},
                                       {"max_projection", nc.max_projection},
                                       {"depth_max_projection", nc.depth_max_projection},
                                       {"matrix_route", nc.matrix_route},
                                       {"coverage", nc.coverage},
                                       {"brackets", nested}};
    } catch (const NotRegularError& e) {
      result["necessary_condition"] = {{"verdict", "not-regular"}, {"sigma_min", e.sigma_min()}, {"message", e.what()}};
    }
  }

  CommandOutcome out;
  out.report = result;
  out.summary = g.name() + ": " + rep.verdict + " (max bracket norm " + fmt(rep.max_bracket_norm) + ")";
  if (cfg.has("checks.expect") && cfg.str("checks.expect") != rep.verdict) {
    out.exit_code = kExitCheckFailed;
    out.summary += "; expected " + cfg.str("checks.expect");
  }
  return out;
}

CommandOutcome simulate(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const Setup setup = build_setup(cfg, ctx.seed);
  const auto problem = build_problem(cfg, setup.g.w_dim(), ctx.seed);
  const TimeDependentLoss loss = build_loss(cfg, setup.g.w_dim(), problem);
  const double T = cfg.real("scenario.T", 10.0);
  FlowOptions opt;
  opt.integrator = build_integrator(cfg);
  opt.grid = sample_grid(T, loss, static_cast<int>(cfg.integer("scenario.grid_points", 200)));
  const std::string flow = cfg.str("scenario.flow", "gradient");
  Trajectory traj;
  if (flow == "gradient") {
    traj = gradient_flow(setup.g, loss, setup.x_init, T, opt);
  } else if (flow == "mirror" || flow == "riemannian") {
    const LegendreFunction f = build_potential(cfg, setup);
    const Vector w0 = setup.g(setup.x_init);
    traj = flow == "mirror" ? mirror_flow(f, loss, w0, T, opt) : riemannian_flow(f, loss, w0, T, opt);
  } else {
    throw ConfigError(cfg.where("scenario.flow") + ": unknown flow '" + flow + "' (gradient, mirror, riemannian)");
  }
  const std::string csv = file_in(ctx, "trajectory.csv");
  write_csv(traj, csv);
  CommandOutcome out;
  out.report = {{"flow", flow},
                {"parametrization", setup.g.name()},
                {"T", T},
                {"w_final", to_json(traj.w.back())},
                {"loss_final", loss.at(T).value ? json(loss.at(T).value(traj.w.back())) : json(nullptr)},
                {"stats", stats_json(traj.stats)},
                {"trajectory_csv", "trajectory.csv"}};
  out.summary = flow + " flow to T=" + fmt(T) + ", " + std::to_string(traj.size()) + " samples -> " + csv;
  return out;
}

CommandOutcome equivalence(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  std::vector<std::uint64_t> seeds;
  if (cfg.has("scenario.seeds")) {
    for (long long s : cfg.integers("scenario.seeds")) seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    seeds.push_back(ctx.seed);
  }
  const double T = cfg.real("scenario.T", 50.0);
  const double tol = cfg.real("checks.tolerance", 1e-6);
  const bool reconstruct = cfg.boolean("checks.reconstruction", true);
  FlowOptions opt;
  opt.integrator = build_integrator(cfg);

  std::vector<json> runs(seeds.size());
  std::vector<bool> passed(seeds.size(), false);
  parallel_for(seeds.size(), ctx.jobs, [&](std::size_t k) {
    const std::uint64_t s = seeds[k];
    const Setup setup = build_setup(cfg, s);
    const auto problem = build_problem(cfg, setup.g.w_dim(), s);
    const TimeDependentLoss loss = build_loss(cfg, setup.g.w_dim(), problem);
    const LegendreFunction f = build_potential(cfg, setup);
    const EquivalenceReport rep = equivalence_report(setup.g, f, loss, setup.x_init, T, opt);
    json run{{"seed", s},
             {"max_deviation", rep.max_deviation},
             {"init_dual_norm", rep.init_dual_norm},
             {"grid_points", rep.times.size()},
             {"gradient_stats", stats_json(rep.gradient.stats)},
             {"mirror_stats", stats_json(rep.mirror.stats)}};
    bool ok = rep.max_deviation <= tol;
    if (reconstruct && setup.g.commutativity() == Commutativity::commuting) {
      const ReconstructionReport rec = psi_reconstruction_check(setup.g, rep.gradient, opt.integrator);
      run["psi_reconstruction_error"] = rec.max_error;
      if (rec.escaped) run["psi_escape"] = rec.message;
      ok = ok && rec.max_error <= tol;
    }
    const std::string name = "equivalence_seed" + std::to_string(s) + ".csv";
    write_csv(rep.gradient, file_in(ctx, name));
    run["trajectory_csv"] = name;
    run["passed"] = ok;
    runs[k] = run;
    passed[k] = ok;
  });

  CommandOutcome out;
  double worst = 0.0;
  for (const auto& r : runs) worst = std::max(worst, r["max_deviation"].get<double>());
  const bool all = std::all_of(passed.begin(), passed.end(), [](bool b) { return b; });
  out.report = {{"T", T}, {"tolerance", tol}, {"max_deviation", worst}, {"runs", runs}, {"passed", all}};
  out.exit_code = all ? kExitPass : kExitCheckFailed;
  out.summary = "equivalence over " + std::to_string(seeds.size()) + " seed(s): max deviation " + fmt(worst) + (all ? " (pass)" : " (FAIL)");
  return out;
}

CommandOutcome bias(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  std::vector<std::optional<double>> scales;
  if (cfg.has("scenario.alphas")) {
    const Vector a = cfg.vector("scenario.alphas");
    for (Index i = 0; i < a.size(); ++i) scales.emplace_back(a[i]);
  } else {
    scales.emplace_back(std::nullopt);
  }
  const double tol = cfg.real("checks.tolerance", 1e-6);
  const int oracle_samples = static_cast<int>(cfg.integer("checks.oracle_samples", 0));
  BiasOptions options;
  options.t_max = cfg.real("scenario.t_max", options.t_max);
  options.integrator = build_integrator(cfg, options.integrator);

  std::vector<json> runs(scales.size());
  std::vector<bool> passed(scales.size(), false);
  parallel_for(scales.size(), ctx.jobs, [&](std::size_t k) {
    Config local = cfg;
    if (scales[k]) {
      char text[32];
      std::snprintf(text, sizeof text, "%.17g", *scales[k]);
      local.set("parametrization.init_scale", text);
      if (local.has("parametrization.init")) throw ConfigError("scenario.alphas conflicts with parametrization.init");
    }
    const Setup setup = build_setup(local, ctx.seed);
    const auto problem = build_problem(local, setup.g.w_dim(), ctx.seed);
    if (!problem) throw ConfigError("bias needs a problem.* section");
    const LegendreFunction f = build_potential(local, setup);
    const BiasReport rep = run_bias_experiment(setup.g, f, *problem, setup.x_init, options);
    json run{{"w_inf", to_json(rep.w_inf)},
             {"interpolation_residual", rep.interpolation_residual},
             {"R_w_inf", rep.r_w_inf},
             {"w_star", to_json(rep.w_star)},
             {"R_w_star", rep.r_w_star},
             {"gap", rep.gap},
             {"bregman_gap", rep.bregman_gap},
             {"kkt_residual", rep.kkt_residual},
             {"oracle_slack", rep.oracle_slack},
             {"converged", rep.converged},
             {"stop_time", rep.stop_time},
             {"final_velocity", rep.final_velocity},
             {"dual_containment", rep.dual_containment},
             {"residual_monotone", rep.residual_monotone},
             {"stats", stats_json(rep.trajectory.stats)}};
    if (scales[k]) run["alpha"] = *scales[k];
    if (!rep.note.empty()) run["note"] = rep.note;
    bool ok = rep.interpolation_residual <= tol && rep.gap <= tol && rep.bregman_gap <= tol &&
              rep.kkt_residual <= 1e-8;
    if (oracle_samples > 0) {
      const FeasibleSampling fs = feasible_sampling_check(f, *problem, rep.w_star, oracle_samples, ctx.seed);
      run["oracle_sampling"] = {{"samples", fs.samples}, {"improvements", fs.improvements}, {"min_gap", fs.min_gap}};
      ok = ok && fs.improvements == 0;
    }
    const std::string name = "bias_" + std::to_string(k) + ".csv";
    write_csv(rep.trajectory, file_in(ctx, name));
    run["trajectory_csv"] = name;
    run["passed"] = ok;
    runs[k] = run;
    passed[k] = ok;
  });

  CommandOutcome out;
  const bool all = std::all_of(passed.begin(), passed.end(), [](bool b) { return b; });
  out.report = {{"tolerance", tol}, {"t_max", options.t_max}, {"runs", runs}, {"passed", all}};
  out.exit_code = all ? kExitPass : kExitCheckFailed;
  std::ostringstream s;
  s << "bias: " << runs.size() << " run(s)";
  for (const auto& r : runs) {
    s << " [residual " << r["interpolation_residual"].get<double>() << ", gap " << r["gap"].get<double>() << "]";
  }
  s << (all ? " (pass)" : " (FAIL)");
  out.summary = s.str();
  return out;
}

CommandOutcome loop_test(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const Setup setup = build_setup(cfg, ctx.seed);
  std::vector<Index> j_seq;
  for (long long j : cfg.integers("loop.j")) j_seq.push_back(static_cast<Index>(j));
  const auto deltas = log_spaced(cfg.real("loop.delta_max", 1e-1), cfg.real("loop.delta_min", 1e-3),
                                 static_cast<int>(cfg.integer("loop.points", 5)));
  const IntegratorConfig integ = build_integrator(cfg);
  const LoopResult res = commutator_loop(setup.g, setup.x_init, j_seq, deltas, integ, ctx.jobs);

  json seq = json::array();
  for (Index j : j_seq) seq.push_back(setup.g.coordinate_name(j));
  json result{{"parametrization", setup.g.name()},
              {"x", to_json(setup.x_init)},
              {"j_seq", seq},
              {"deltas", res.deltas},
              {"durations", res.durations},
              {"displacements", res.displacements},
              {"slope", res.slope},
              {"fit_points", res.fit_points},
              {"dropped_largest", res.dropped_largest},
              {"direction", to_json(res.direction)},
              {"predicted_direction", to_json(res.predicted_direction)},
              {"cosine", res.cosine}};
  CommandOutcome out;
  const std::string expect = cfg.str("checks.expect", "");
  bool ok = true;
  if (expect == "non-commuting") {
    ok = res.slope >= cfg.real("checks.slope_min", 0.9) && res.slope <= cfg.real("checks.slope_max", 1.1) &&
         res.cosine >= cfg.real("checks.cosine_min", 0.95);
  } else if (expect == "commuting") {
    const double limit = cfg.real("checks.displacement_tol", 1e-8);
    ok = std::all_of(res.displacements.begin(), res.displacements.end(), [&](double v) { return v <= limit; });
  } else if (!expect.empty()) {
    throw ConfigError(cfg.where("checks.expect") + ": expected commuting or non-commuting");
  }
  result["passed"] = ok;
  out.report = result;
  out.exit_code = ok ? kExitPass : kExitCheckFailed;
  std::ostringstream s;
  s << "loop " << setup.g.name() << ": slope " << res.slope << ", cosine " << res.cosine << ", smallest displacement "
    << res.displacements.back() << (ok ? " (pass)" : " (FAIL)");
  out.summary = s.str();
  return out;
}

CommandOutcome legendre_probe(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const Setup setup = build_setup(cfg, ctx.seed);
  const LegendreFunction f = build_potential(cfg, setup);
  LegendreValidationOptions opt;
  opt.samples = static_cast<int>(cfg.integer("checks.samples", opt.samples));
  opt.sample_scale = cfg.real("checks.sample_scale", opt.sample_scale);
  opt.seed = ctx.seed;
  opt.boundary_probes = static_cast<int>(cfg.integer("checks.boundary_probes", opt.boundary_probes));
  opt.boundary_target = cfg.vector_opt("checks.boundary_target");
  opt.boundary_start = cfg.vector_opt("checks.boundary_start");
  opt.level = cfg.real("checks.level", opt.level);
  opt.level_rays = static_cast<int>(cfg.integer("checks.level_rays", opt.level_rays));
  const LegendreReport rep = legendre_validate(f, opt);
  json result{{"potential", rep.name},
              {"provenance", f.provenance() == Provenance::closed_form ? "closed_form" : "numeric_conjugate"},
              {"samples", rep.samples},
              {"min_hessian_eigenvalue", rep.min_hessian_eigenvalue},
              {"strictly_convex", rep.strictly_convex},
              {"max_inversion_residual", rep.max_inversion_residual},
              {"inversion_ok", rep.inversion_ok},
              {"max_reciprocity_residual", rep.max_reciprocity_residual},
              {"reciprocity_ok", rep.reciprocity_ok},
              {"min_bregman", rep.min_bregman},
              {"max_self_divergence", rep.max_self_divergence},
              {"bregman_nonnegative", rep.bregman_nonnegative},
              {"boundary_checked", rep.boundary_checked},
              {"boundary_gradient_norms", rep.boundary_gradient_norms},
              {"boundary_monotone", rep.boundary_monotone},
              {"boundary_unbounded", rep.boundary_unbounded},
              {"level_set_sup_radius", rep.level_set_sup_radius},
              {"level_sets_bounded", rep.level_sets_bounded},
              {"continuity_divergences", rep.continuity_divergences},
              {"divergence_continuous", rep.divergence_continuous},
              {"surjectivity", rep.surjectivity},
              {"domain_note", rep.domain_note},
              {"passed", rep.passed()}};
  CommandOutcome out;
  out.report = result;
  out.exit_code = rep.passed() ? kExitPass : kExitCheckFailed;
  out.summary = "legendre-probe " + rep.name + (rep.passed() ? ": all conditions hold" : ": a condition FAILED");
  return out;
}

CommandOutcome domain_probe_cmd(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  const Setup setup = build_setup(cfg, ctx.seed);
  const double budget = cfg.real("checks.budget", 10.0);
  const Hyperrectangle box = domain_probe(setup.g, setup.x_init, budget, build_integrator(cfg));
  json axes = json::array();
  for (std::size_t i = 0; i < box.axes.size(); ++i) {
    const AxisInterval& a = box.axes[i];
    axes.push_back({{"coordinate", setup.g.coordinate_name(static_cast<Index>(i))},
                    {"lower", a.lower_beyond_budget ? json(nullptr) : json(a.lower)},
                    {"upper", a.upper_beyond_budget ? json(nullptr) : json(a.upper)},
                    {"lower_beyond_budget", a.lower_beyond_budget},
                    {"upper_beyond_budget", a.upper_beyond_budget}});
  }
  CommandOutcome out;
  out.report = {{"parametrization", setup.g.name()}, {"x", to_json(setup.x_init)}, {"budget", budget}, {"axes", axes}};
  std::ostringstream s;
  s << "domain-probe " << setup.g.name() << ":";
  for (const auto& a : box.axes) {
    s << " (" << (a.lower_beyond_budget ? "<-" + fmt(budget) : fmt(a.lower)) << ", "
      << (a.upper_beyond_budget ? ">" + fmt(budget) : fmt(a.upper)) << ")";
  }
  out.summary = s.str();
  return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"check-commuting", "simulate",       "equivalence", "bias",
                                              "loop-test",       "legendre-probe", "domain-probe"};
  return names;
}

CommandOutcome run_command(const std::string& command, const RunContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  CommandOutcome out;
  if (command == "check-commuting") {
    out = check_commuting(ctx);
  } else if (command == "simulate") {
    out = simulate(ctx);
  } else if (command == "equivalence") {
    out = equivalence(ctx);
  } else if (command == "bias") {
    out = bias(ctx);
  } else if (command == "loop-test") {
    out = loop_test(ctx);
  } else if (command == "legendre-probe") {
    out = legendre_probe(ctx);
  } else if (command == "domain-probe") {
    out = domain_probe_cmd(ctx);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  json config = json::object();
  for (const auto& [k, v] : ctx.config.entries()) config[k] = v;
  json report{{"schema_version", kSchemaVersion},
              {"command", command},
              {"config_hash", ctx.config.hash()},
              {"seed", ctx.seed},
              {"config", config},
              {"status", out.exit_code == kExitPass ? "pass" : "fail"},
              {"result", out.report}};
  const std::string path = file_in(ctx, command + ".json");
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path);
  file << report.dump(2) << '\n';
  out.report = std::move(report);
  return out;
}

}  // namespace reparam::cli
