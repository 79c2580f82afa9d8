// polyray: command-line front end.
//
//   polyray poly green|angle   --poly P --point re,im
//   polyray ray trace          --poly P --angle p/q[:left|right] [--b-start X] [--b-end X] [--depth N]
//   polyray renorm detect      --poly P
//   polyray lambda sample      --poly P [--depth K | --den-max N]
//   polyray pmap eval|preimage --poly P --angle p/q
//   polyray verify all         --poly P [--depth K] [--den-max N] [--seed S] [--b0 X]
//   polyray plot rays          --poly P [--den-max N] [--b-start X] [--b-end X]
//
// Every subcommand writes to --out (atomically) or standard output.
// Exit codes: 0 ok, 1 domain error, 2 usage error, 3 invariant violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "polyray/angle_map.hpp"
#include "polyray/potential.hpp"
#include "polyray/ray.hpp"
#include "polyray/render.hpp"
#include "polyray/renorm.hpp"
#include "polyray/verify.hpp"

using namespace polyray;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string poly;
  std::string angle;
  std::string point;
  std::optional<double> b_start;
  std::optional<double> b_end;
  std::optional<int> depth;
  std::optional<long> den_max;
  std::optional<std::uint64_t> seed;
  std::optional<double> b0;
  std::string out;
};

Polynomial load_poly(const Flags& f) {
  if (f.poly.empty()) throw UsageError("--poly is required");
  std::ifstream in(f.poly);
  if (!in) throw Error(ErrorKind::Parse, "cannot open polynomial file " + f.poly);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "bad polynomial JSON in " + f.poly + ": " + e.what());
  }
  return polynomial_from_json(j);
}

Angle parse_angle(const std::string& text) {
  if (text.empty()) throw UsageError("--angle is required");
  try {
    return Angle::parse(text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

cplx parse_point(const std::string& text) {
  if (text.empty()) throw UsageError("--point re,im is required");
  auto comma = text.find(',');
  try {
    std::size_t used = 0;
    double re = std::stod(text.substr(0, comma), &used);
    if (used != comma && comma != std::string::npos) throw UsageError("bad --point");
    double im = comma == std::string::npos ? 0.0 : std::stod(text.substr(comma + 1));
    return {re, im};
  } catch (const std::logic_error&) {
    throw UsageError("--point must be re,im");
  }
}

/// Write-to-temp then rename, so a failed run never leaves a partial file.
void emit(const Flags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::filesystem::path target(f.out);
  std::filesystem::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Domain, "cannot write " + tmp.string());
    os << text;
    os.flush();
    if (!os) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::Domain, "write failed for " + f.out);
    }
  }
  std::filesystem::rename(tmp, target);
}

/// Renormalization when detectable; otherwise trace options carrying crash
/// pairs of every escaping critical point that can be resolved.
struct Context {
  Polynomial poly;
  std::optional<Renormalization> ren;
  TraceOptions options;
};

Context context_for(const Polynomial& p, int nest_depth) {
  Context c{p, std::nullopt, {}};
  try {
    c.ren = build_renormalization(p);
    c.options = c.ren->trace_options(nest_depth);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotDisconnected && e.kind() != ErrorKind::NoBoundedCritical &&
        e.kind() != ErrorKind::ModelMismatch && e.kind() != ErrorKind::PeriodBudgetExceeded)
      throw;
    auto crit = classify_criticals(p);
    c.options.escaping = crit.escaping;
    for (const auto& esc : crit.escaping) {
      try {
        c.options.crash_pairs.push_back(crash_angle_pair(p, esc));
      } catch (const Error&) {
      }
    }
  }
  return c;
}

FundamentalArcs arcs_or_throw(const Context& c) {
  if (!c.ren) throw Error(ErrorKind::NotDisconnected, "no renormalization: the angle map needs a disconnected filled Julia set");
  return arcs_for(*c.ren);
}

int cmd_poly_green(const Flags& f) {
  Polynomial p = load_poly(f);
  cplx z = parse_point(f.point);
  GreenEstimate g = green_potential(p, z, 1e-14);
  json j = {{"point", {ray_detail::fmt17(z.real()), ray_detail::fmt17(z.imag())}},
            {"escaped", g.escaped},
            {"potential", ray_detail::fmt17(g.escaped ? g.value : 0.0)},
            {"error_bound", ray_detail::fmt17(g.error_bound)},
            {"iterations", g.iterations}};
  emit(f, j.dump(2) + "\n");
  return 0;
}

int cmd_poly_angle(const Flags& f) {
  Polynomial p = load_poly(f);
  cplx z = parse_point(f.point);
  double theta = external_angle(p, z, 1e-14);
  json j = {{"point", {ray_detail::fmt17(z.real()), ray_detail::fmt17(z.imag())}}, {"angle", ray_detail::fmt17(theta)}};
  mpq_class q = best_rational(theta, 10000);
  if (std::abs(std::remainder(q.get_d() - theta, 1.0)) < 1e-11) j["rational"] = rational_string(q);
  emit(f, j.dump(2) + "\n");
  return 0;
}

int cmd_ray_trace(const Flags& f) {
  Polynomial p = load_poly(f);
  Angle tau = parse_angle(f.angle);
  Context c = context_for(p, f.depth.value_or(-1));
  RayTrace t = trace_ray(p, tau, f.b_start.value_or(4.0), f.b_end.value_or(1e-4), c.options);
  emit(f, to_json(t).dump() + "\n");
  return 0;
}

int cmd_renorm_detect(const Flags& f) {
  Polynomial p = load_poly(f);
  Renormalization ren = build_renormalization(p);
  emit(f, to_json(ren).dump(2) + "\n");
  return 0;
}

int cmd_lambda_sample(const Flags& f) {
  Polynomial p = load_poly(f);
  Context c = context_for(p, -1);
  FundamentalArcs a = arcs_or_throw(c);
  std::vector<Angle> angles;
  if (f.depth) {
    if (*f.depth < 1 || *f.depth > 10) throw UsageError("--depth must be in 1..10");
    long den = 1;
    for (int i = 0; i < *f.depth; ++i) den *= a.D;
    --den;
    for (long k = 0; k < den; ++k) angles.emplace_back(k, den);
  } else {
    long nmax = f.den_max.value_or(36);
    if (nmax < 1 || nmax > 2000) throw UsageError("--den-max must be in 1..2000 for lambda sample");
    std::set<mpq_class> seen;
    for (long q = 1; q <= nmax; ++q)
      for (long k = 0; k < q; ++k) seen.insert(Angle(k, q).value());
    for (const auto& v : seen) angles.emplace_back(v);
  }
  std::ostringstream csv;
  csv << "angle,verdict,excluded_step,digits_preperiod,digits_period,p_value\n";
  for (const auto& t : angles) {
    LambdaVerdict v = membership(a, t);
    csv << t.to_string() << "," << to_string(v.verdict) << ",";
    if (v.member()) {
      csv << "," << DigitStream::join(v.digits->preperiod) << "," << DigitStream::join(v.digits->period) << ","
          << Angle(digits_value(*v.digits, a.m)).to_string();
    } else {
      csv << v.excluded_step << ",,,";
    }
    csv << "\n";
  }
  emit(f, csv.str());
  return 0;
}

int cmd_pmap_eval(const Flags& f) {
  Polynomial p = load_poly(f);
  Angle tau = parse_angle(f.angle);
  FundamentalArcs a = arcs_or_throw(context_for(p, -1));
  emit(f, compute_p(a, tau).to_string() + "\n");
  return 0;
}

int cmd_pmap_preimage(const Flags& f) {
  Polynomial p = load_poly(f);
  Angle t = parse_angle(f.angle);
  FundamentalArcs a = arcs_or_throw(context_for(p, -1));
  PPreimage pre = p_preimage(a, t);
  std::string text = pre.tau.to_string() + "\n";
  if (pre.alternate) text += pre.alternate->to_string() + "\n";
  emit(f, text);
  return 0;
}

int cmd_verify_all(const Flags& f) {
  Polynomial p = load_poly(f);
  VerifyConfig cfg;
  if (f.depth) {
    if (*f.depth < 1 || *f.depth > 9) throw UsageError("--depth must be in 1..9");
    cfg.grid_depth = cfg.nest_depth = cfg.gap_levels = cfg.cover_enumeration = *f.depth;
  }
  if (f.den_max) {
    if (*f.den_max < 1) throw UsageError("--den-max must be positive");
    cfg.den_max = *f.den_max;
  }
  if (f.seed) cfg.seed = *f.seed;
  Renormalization ren = build_renormalization(p);
  json config = {{"poly", to_json(p)}, {"verify", to_json(cfg)}};
  if (f.b0) {
    // Fault injection: keep the nest polygons but move the nominal base level.
    ren.b0 = *f.b0;
    ren.b0_margin = critical_margin(p.degree(), ren.escaping, ren.b0);
    config["b0_override"] = ray_detail::fmt17(*f.b0);
  }
  VerifyReport rep = verify_all(p, ren, cfg);
  json suites = json::array();
  for (const auto& s : rep.suites) suites.push_back(to_json(s));
  json j = {{"suites", suites}, {"config", config}};
  emit(f, j.dump(2) + "\n");
  if (!rep.pass()) {
    for (const auto& s : rep.suites)
      for (const auto& v : s.violations) std::cerr << "violation [" << s.name << "]: " << v << "\n";
    return 3;
  }
  return 0;
}

int cmd_plot_rays(const Flags& f) {
  Polynomial p = load_poly(f);
  Context c = context_for(p, -1);
  std::optional<FundamentalArcs> arcs;
  if (c.ren) {
    try {
      arcs = arcs_for(*c.ren);
    } catch (const Error&) {
    }
  }
  long n = f.den_max.value_or(64);
  if (n < 0 || n > 4096) throw UsageError("--den-max must be in 0..4096 for plot rays");
  RenderInput in;
  in.poly = p;
  in.ren = c.ren ? &*c.ren : nullptr;
  in.arcs = arcs ? &*arcs : nullptr;
  const double b_start = f.b_start.value_or(4.0), b_end = f.b_end.value_or(1e-3);
  for (long k = 0; k < n; ++k) {
    Angle tau(k, n);
    RayTrace t = trace_ray(p, tau, b_start, b_end, c.options);
    if (t.status == RayStatus::crashed_unresolved && !c.options.crash_pairs.empty()) {
      RayTrace left = trace_ray(p, tau.with_side(Side::left), b_start, b_end, c.options);
      left.crash = t.crash;
      t = std::move(left);
    }
    in.rays.push_back(std::move(t));
  }
  emit(f, render_svg(in));
  return 0;
}

int exit_code(const Error& e) { return e.kind() == ErrorKind::TheoremViolation ? 3 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial external rays, renormalization nests and the angle map p"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--poly", f.poly, "polynomial JSON file");
    sub->add_option("--out", f.out, "output path (written atomically)");
  };
  auto add_angle = [&](CLI::App* sub) { sub->add_option("--angle", f.angle, "exact angle p/q[:left|right]"); };
  auto add_point = [&](CLI::App* sub) { sub->add_option("--point", f.point, "point re,im"); };
  auto add_levels = [&](CLI::App* sub) {
    sub->add_option("--b-start", f.b_start, "starting potential");
    sub->add_option("--b-end", f.b_end, "final potential");
  };
  auto add_depth = [&](CLI::App* sub) { sub->add_option("--depth", f.depth, "depth"); };
  auto add_den = [&](CLI::App* sub) { sub->add_option("--den-max", f.den_max, "denominator bound / ray count"); };

  std::function<int()> action;
  auto leaf = [&](CLI::App* parent, const char* name, const char* help, std::function<int()> run) {
    CLI::App* sub = parent->add_subcommand(name, help);
    add_common(sub);
    sub->callback([&action, run] { action = run; });
    return sub;
  };

  CLI::App* poly = app.add_subcommand("poly", "potential and external angle of a point");
  poly->require_subcommand(1);
  add_point(leaf(poly, "green", "Green's potential", [&] { return cmd_poly_green(f); }));
  add_point(leaf(poly, "angle", "external angle", [&] { return cmd_poly_angle(f); }));

  CLI::App* ray = app.add_subcommand("ray", "external rays");
  ray->require_subcommand(1);
  {
    CLI::App* s = leaf(ray, "trace", "trace one ray as JSON", [&] { return cmd_ray_trace(f); });
    add_angle(s);
    add_levels(s);
    add_depth(s);
  }

  CLI::App* renorm = app.add_subcommand("renorm", "renormalization");
  renorm->require_subcommand(1);
  leaf(renorm, "detect", "detect the renormalization and print it as JSON", [&] { return cmd_renorm_detect(f); });

  CLI::App* lambda = app.add_subcommand("lambda", "the angle set Lambda");
  lambda->require_subcommand(1);
  {
    CLI::App* s = leaf(lambda, "sample", "membership verdicts as CSV", [&] { return cmd_lambda_sample(f); });
    add_depth(s);
    add_den(s);
  }

  CLI::App* pmap = app.add_subcommand("pmap", "the angle map p");
  pmap->require_subcommand(1);
  add_angle(leaf(pmap, "eval", "p(tau)", [&] { return cmd_pmap_eval(f); }));
  add_angle(leaf(pmap, "preimage", "a member tau with p(tau) = t", [&] { return cmd_pmap_preimage(f); }));

  CLI::App* verify = app.add_subcommand("verify", "invariant suites");
  verify->require_subcommand(1);
  {
    CLI::App* s = leaf(verify, "all", "run every suite and print the JSON report", [&] { return cmd_verify_all(f); });
    add_depth(s);
    add_den(s);
    s->add_option("--seed", f.seed, "sampling seed");
    s->add_option("--b0", f.b0, "override the base level (fault injection)");
  }

  CLI::App* plot = app.add_subcommand("plot", "figures");
  plot->require_subcommand(1);
  {
    CLI::App* s = leaf(plot, "rays", "SVG of rays k/N and the nest", [&] { return cmd_plot_rays(f); });
    add_den(s);
    add_levels(s);
    s->add_option("--seed", f.seed, "accepted for a uniform run configuration");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
