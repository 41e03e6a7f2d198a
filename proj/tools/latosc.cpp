// latosc: lattice-oscillator normal form toolkit.
//
// Subcommands: selftest | nonres | measure | normal-form | simulate.
// Every command reads one JSON config (unknown keys rejected), and every
// output file embeds the effective config and a format version, so a rerun
// with the same config reproduces the same bytes.  Exit codes: 0 success,
// 1 property or threshold failure, 2 configuration error, 3 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "latosc/dynamics.hpp"
#include "latosc/media.hpp"
#include "latosc/model.hpp"
#include "latosc/normal_form.hpp"
#include "latosc/poly.hpp"
#include "latosc/selftest.hpp"

using json = nlohmann::json;
using namespace latosc;

namespace {

constexpr int kFormatVersion = 1;

struct RunConfig {
  int d = 1;
  int L = 1;
  double sigma = 2.0;
  double eps = 1e-3;
  double eta = 0.1;
  std::optional<int> M;
  std::uint64_t seed = 0;
  std::uint64_t trials = 10000;
  double dt = 1e-3;
  double T = 1.0;
  int sample_every = 1;
  std::string variables = "original";      // simulate: original | rescaled
  std::string media = "sampled";           // sampled | zero
  std::string inner = "sampled";           // sampled | zero
  std::string perturbation = "full_shortrange";  // full_shortrange | none
  double perturbation_coeff = 1.0;
  double init_amplitude = -1.0;  // < 0 means "use eps"
  bool init_origin_zero = true;
  std::string resume_from;

  json echo;  // effective config, embedded in outputs
};

[[noreturn]] void config_fail(const std::string& msg) {
  std::cerr << "config error: " << msg << "\n";
  std::exit(2);
}

RunConfig load_config(const std::string& path, const std::set<std::string>& allowed,
                      const std::set<std::string>& required,
                      std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) config_fail("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    config_fail(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) config_fail("config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) config_fail("unknown config key '" + key + "'");
  for (const std::string& key : required)
    if (!doc.count(key)) config_fail("missing required config key '" + key + "'");

  RunConfig cfg;
  try {
    if (doc.count("d")) cfg.d = doc["d"].get<int>();
    if (doc.count("L")) cfg.L = doc["L"].get<int>();
    if (doc.count("sigma")) cfg.sigma = doc["sigma"].get<double>();
    if (doc.count("eps")) cfg.eps = doc["eps"].get<double>();
    if (doc.count("eta")) cfg.eta = doc["eta"].get<double>();
    if (doc.count("M")) cfg.M = doc["M"].get<int>();
    if (doc.count("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.count("trials")) cfg.trials = doc["trials"].get<std::uint64_t>();
    if (doc.count("dt")) cfg.dt = doc["dt"].get<double>();
    if (doc.count("T")) cfg.T = doc["T"].get<double>();
    if (doc.count("sample_every")) cfg.sample_every = doc["sample_every"].get<int>();
    if (doc.count("variables")) cfg.variables = doc["variables"].get<std::string>();
    if (doc.count("media")) cfg.media = doc["media"].get<std::string>();
    if (doc.count("inner")) cfg.inner = doc["inner"].get<std::string>();
    if (doc.count("perturbation")) cfg.perturbation = doc["perturbation"].get<std::string>();
    if (doc.count("perturbation_coeff"))
      cfg.perturbation_coeff = doc["perturbation_coeff"].get<double>();
    if (doc.count("init_amplitude")) cfg.init_amplitude = doc["init_amplitude"].get<double>();
    if (doc.count("init_origin_zero")) cfg.init_origin_zero = doc["init_origin_zero"].get<bool>();
    if (doc.count("resume_from")) cfg.resume_from = doc["resume_from"].get<std::string>();
  } catch (const std::exception& e) {
    config_fail(std::string("bad field type: ") + e.what());
  }
  if (seed_override) cfg.seed = *seed_override;

  if (cfg.d < 1 || cfg.d > kMaxDim) config_fail("field 'd' must be in [1,4]");
  if (cfg.L < 0) config_fail("field 'L' must be >= 0");
  if (!(cfg.sigma > 0)) config_fail("field 'sigma' must be positive");
  if (!(cfg.eps > 0)) config_fail("field 'eps' must be positive");
  if (!(cfg.eta > 0)) config_fail("field 'eta' must be positive");
  if (cfg.M && *cfg.M < 1) config_fail("field 'M' must be a positive integer");
  if (cfg.variables != "original" && cfg.variables != "rescaled")
    config_fail("field 'variables' must be 'original' or 'rescaled'");
  if (cfg.media != "sampled" && cfg.media != "zero")
    config_fail("field 'media' must be 'sampled' or 'zero'");
  if (cfg.inner != "sampled" && cfg.inner != "zero")
    config_fail("field 'inner' must be 'sampled' or 'zero'");
  if (cfg.perturbation != "full_shortrange" && cfg.perturbation != "none")
    config_fail("field 'perturbation' must be 'full_shortrange' or 'none'");
  if (std::abs(cfg.perturbation_coeff) > 1.0)
    config_fail("field 'perturbation_coeff' must have modulus <= 1");
  if (cfg.sample_every < 1) config_fail("field 'sample_every' must be >= 1");

  // Echo the effective value of every knob the command accepts, defaults
  // included.  resume_from stays out: it is restart plumbing, and leaving it
  // out keeps resumed stage checkpoints byte-identical to uninterrupted ones.
  cfg.echo = json{{"d", cfg.d},
                  {"L", cfg.L},
                  {"sigma", cfg.sigma},
                  {"eps", cfg.eps},
                  {"eta", cfg.eta},
                  {"seed", cfg.seed}};
  if (cfg.M) cfg.echo["M"] = *cfg.M;
  auto echo_if = [&](const char* key, json value) {
    if (allowed.count(key)) cfg.echo[key] = std::move(value);
  };
  echo_if("media", cfg.media);
  echo_if("inner", cfg.inner);
  echo_if("trials", cfg.trials);
  echo_if("dt", cfg.dt);
  echo_if("T", cfg.T);
  echo_if("sample_every", cfg.sample_every);
  echo_if("variables", cfg.variables);
  echo_if("perturbation", cfg.perturbation);
  echo_if("perturbation_coeff", cfg.perturbation_coeff);
  echo_if("init_amplitude", cfg.init_amplitude);
  echo_if("init_origin_zero", cfg.init_origin_zero);
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << path << "\n";
    std::exit(2);
  }
  out << text;
}

json kvector_to_json(const KVector& k) {
  json arr = json::array();
  for (const auto& [s, v] : k.entries()) arr.push_back({s.coords(), v});
  return arr;
}

Media make_media(const RunConfig& cfg, const BoxSpec& box) {
  if (cfg.media == "zero") return Media{box, std::vector<double>(box.site_count(), 0.0)};
  return sample_media(cfg.seed, box);
}

InnerParams make_inner(const RunConfig& cfg, const BoxSpec& box) {
  if (cfg.inner == "zero") return zero_inner(box, cfg.sigma);
  return sample_inner(cfg.seed, box, cfg.sigma);
}

int resolve_M(const RunConfig& cfg) {
  if (cfg.M) return *cfg.M;
  try {
    return choose_M(cfg.eps, cfg.sigma).M;
  } catch (const EpsTooLarge& e) {
    config_fail(std::string("'M' not given and the horizon formula does not apply: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_selftest(const std::string& hook) {
  if (hook == "corrupt-bracket-sign") hooks::corrupt_bracket_sign = true;
  auto suites = selftest::run_suites();
  json out;
  out["format_version"] = kFormatVersion;
  out["suites"] = json::array();
  bool all = true;
  std::string first_fail;
  for (const auto& s : suites) {
    out["suites"].push_back({{"name", s.name}, {"pass", s.pass}, {"detail", s.detail}});
    if (!s.pass && first_fail.empty()) first_fail = s.name;
    all = all && s.pass;
  }
  out["all_pass"] = all;
  std::cout << out.dump(2) << "\n";
  if (!all) {
    std::cerr << "selftest failed: " << first_fail << "\n";
    return 1;
  }
  return 0;
}

int cmd_nonres(const RunConfig& cfg, const std::filesystem::path& outdir) {
  BoxSpec box{cfg.d, cfg.L};
  Media media = make_media(cfg, box);
  InnerParams zeta = make_inner(cfg, box);
  FrequencyMap omega = frequencies(media, zeta, cfg.eps);
  int M = resolve_M(cfg);
  NonResReport report = check_nonresonance(omega, cfg.eta, M, cfg.sigma, box);

  json out;
  out["format_version"] = kFormatVersion;
  out["config"] = cfg.echo;
  out["M"] = M;
  out["checked"] = report.checked;
  out["violations"] = json::array();
  for (const Violation& v : report.violations)
    out["violations"].push_back(
        {{"k", kvector_to_json(v.k)}, {"divisor", v.divisor}, {"threshold", v.threshold}});
  if (report.min_margin)
    out["min_margin"] = *report.min_margin;
  else
    out["min_margin"] = nullptr;
  write_file(outdir / "nonres_report.json", out.dump(2) + "\n");
  std::cout << "checked " << report.checked << " vectors, " << report.violations.size()
            << " violations\n";
  return report.nonresonant() ? 0 : 1;
}

int cmd_measure(const RunConfig& cfg, const std::filesystem::path& outdir, int threads) {
  if (cfg.trials < 100) config_fail("field 'trials' must be >= 100");
  BoxSpec box{cfg.d, cfg.L};
  Media media = make_media(cfg, box);
  int M = resolve_M(cfg);
  MeasureResult res =
      measure_mc(cfg.eta, M, box, cfg.sigma, cfg.eps, media, cfg.trials, cfg.seed, threads);

  bool ok = res.fraction_resonant <= cfg.eta + 3.0 * res.std_error;
  json out;
  out["format_version"] = kFormatVersion;
  out["config"] = cfg.echo;
  out["M"] = M;
  out["eta"] = cfg.eta;
  out["fraction_resonant"] = res.fraction_resonant;
  out["stderr"] = res.std_error;
  out["trials"] = res.trials;
  out["seed"] = res.seed;
  out["pass"] = ok;
  write_file(outdir / "measure_mc.json", out.dump(2) + "\n");
  std::cout << "fraction_resonant " << res.fraction_resonant << " (target eta " << cfg.eta
            << ", stderr " << res.std_error << ")\n";
  return ok ? 0 : 1;
}

json stage_to_json(const BnfStage& stage, const RunConfig& cfg) {
  json out;
  out["format_version"] = kFormatVersion;
  out["config"] = cfg.echo;
  out["s"] = stage.s;
  out["remainder_ledger"] = stage.remainder_ledger;
  out["max_bound_ratio"] = stage.max_bound_ratio;
  out["last_residual"] = stage.last_residual;
  out["D"] = json::parse(hampoly_to_json(stage.D));
  out["J"] = json::parse(hampoly_to_json(stage.J));
  out["Z"] = json::parse(hampoly_to_json(stage.Z));
  out["R"] = json::parse(hampoly_to_json(stage.R));
  out["generators"] = json::array();
  for (const HamPoly& F : stage.generators)
    out["generators"].push_back(json::parse(hampoly_to_json(F)));
  return out;
}

BnfStage stage_from_json(const json& doc, const FrequencyMap& omega) {
  BnfStage stage;
  stage.s = doc.at("s").get<int>();
  stage.remainder_ledger = doc.at("remainder_ledger").get<double>();
  stage.max_bound_ratio = doc.at("max_bound_ratio").get<double>();
  stage.last_residual = doc.at("last_residual").get<double>();
  stage.D = hampoly_from_json(doc.at("D").dump());
  stage.J = hampoly_from_json(doc.at("J").dump());
  stage.Z = hampoly_from_json(doc.at("Z").dump());
  stage.R = hampoly_from_json(doc.at("R").dump());
  for (const auto& g : doc.at("generators"))
    stage.generators.push_back(hampoly_from_json(g.dump()));
  stage.omega = omega;
  return stage;
}

int cmd_normal_form(const RunConfig& cfg, const std::filesystem::path& outdir) {
  BoxSpec box{cfg.d, cfg.L};
  Media media = make_media(cfg, box);
  InnerParams zeta = make_inner(cfg, box);
  FrequencyMap omega = frequencies(media, zeta, cfg.eps);
  int M = resolve_M(cfg);
  if (M % 2 != 0) ++M;  // the step count (M-4)/2 needs even parity
  if (M < 6) config_fail("field 'M' must be at least 6 for the normal form");
  BnfConfig bnf{cfg.eps, cfg.eta, cfg.sigma, cfg.d, M, box};

  NonResReport nr = check_nonresonance(omega, cfg.eta, M, cfg.sigma, box);
  if (!nr.nonresonant()) {
    std::cerr << "frequency fails the non-resonance check (" << nr.violations.size()
              << " violations); not iterating\n";
    return 1;
  }

  BnfStage stage;
  if (!cfg.resume_from.empty()) {
    std::ifstream in(cfg.resume_from);
    if (!in) config_fail("cannot open checkpoint '" + cfg.resume_from + "'");
    stage = stage_from_json(json::parse(in), omega);
  } else {
    std::vector<Monomial> family;
    if (cfg.perturbation == "full_shortrange")
      family = full_shortrange_family(box, cfg.perturbation_coeff);
    HamPoly H1 = build_model_hamiltonian(box, cfg.eps, family, zeta, media);
    stage = initial_stage(H1, omega, bnf);
  }

  double worst_residual = 0.0;
  try {
    while (stage.s <= bnf.planned_steps()) {
      stage = bnf_step(stage, bnf);
      worst_residual = std::max(worst_residual, stage.last_residual);
      write_file(outdir / ("stage_" + std::to_string(stage.s) + ".json"),
                 stage_to_json(stage, cfg).dump(2) + "\n");
    }
  } catch (const BoundViolation& e) {
    std::cerr << "bound ledger violation at step " << stage.s << ": " << e.what() << "\n";
    return 1;
  } catch (const SmallDivisorViolation& e) {
    std::cerr << "small divisor at step " << stage.s << ": " << e.what() << "\n";
    return 1;
  }

  bool z_pure = true;
  for (const auto& [key, c] : stage.Z.terms()) z_pure = z_pure && key.action_only();
  bool ok = z_pure && worst_residual < 1e-12 && stage.max_bound_ratio <= 1.0;

  json ledger;
  ledger["format_version"] = kFormatVersion;
  ledger["config"] = cfg.echo;
  ledger["M"] = M;
  ledger["max_bound_ratio"] = stage.max_bound_ratio;
  ledger["remainder_bound"] = stage.remainder_ledger;
  ledger["target_scale"] = std::pow(cfg.eps, 0.24 * M);
  ledger["worst_residual"] = worst_residual;
  ledger["z_terms"] = stage.Z.size();
  ledger["r_terms"] = stage.R.size();
  ledger["pass"] = ok;
  write_file(outdir / "bound_ledger.json", ledger.dump(2) + "\n");
  std::cout << "normal form done: max bound ratio " << stage.max_bound_ratio
            << ", remainder " << stage.remainder_ledger << "\n";
  return ok ? 0 : 1;
}

std::string site_label(const Site& j) {
  std::string label = "I_";
  for (int i = 0; i < j.dim(); ++i) {
    if (i) label += "_";
    label += std::to_string(j[i]);
  }
  return label;
}

StateVector initial_state(const RunConfig& cfg, const BoxSpec& box) {
  double amp = cfg.init_amplitude >= 0.0 ? cfg.init_amplitude : cfg.eps;
  StateVector q(box);
  for (int i = 0; i < q.size(); ++i) {
    Site j = box.site_at(i);
    double u = rng::uniform(cfg.seed, rng::kStreamState, j, 0);
    double phi = 2.0 * M_PI * rng::uniform(cfg.seed, rng::kStreamState, j, 1);
    double r = amp * (0.5 + 0.5 * u) * std::pow(1.0 + j.l1(), -cfg.sigma);
    q[i] = std::polar(r, phi);
  }
  if (cfg.init_origin_zero) q.set(Site::from_coords(std::vector<int>(box.d, 0)), cplx{0.0, 0.0});
  return q;
}

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& outdir,
                 const std::string& hook) {
  BoxSpec box{cfg.d, cfg.L};
  Media media = make_media(cfg, box);
  // in the original variables nothing depends on zeta
  InnerParams zeta = cfg.variables == "rescaled" ? make_inner(cfg, box)
                                                 : zero_inner(box, cfg.sigma);

  std::vector<Monomial> family;
  if (cfg.perturbation == "full_shortrange")
    family = full_shortrange_family(box, cfg.perturbation_coeff);

  HamPoly H = cfg.variables == "rescaled"
                  ? build_model_hamiltonian(box, cfg.eps, family, zeta, media)
                  : build_original_hamiltonian(box, media, family);
  if (hook == "amplify-perturbation") {
    // scale the degree-6 part far past the admissible range
    HamPoly amplified;
    for (const auto& [key, c] : H.terms())
      amplified.add(key, key.degree() == 6 ? c * 1e3 : c);
    H = amplified;
  }

  StateVector q0 = initial_state(cfg, box);
  IntegratorConfig icfg{cfg.dt, cfg.T, Scheme::strang, cfg.sample_every};

  Trajectory traj;
  try {
    traj = integrate(H, q0, icfg, zeta, cfg.eps);
  } catch (const StepUnstable& e) {
    std::cerr << "integration unstable: " << e.what() << "\n";
    return 3;
  }

  // trajectory.csv: t, energy, then per-site actions in canonical order
  std::ostringstream csv;
  csv.precision(17);
  csv << "# latosc trajectory format_version=" << kFormatVersion << " config=" << cfg.echo.dump()
      << "\n";
  csv << "t,energy";
  for (const Site& j : box.sites()) csv << "," << site_label(j);
  csv << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    csv << traj.times[k] << "," << traj.energies[k];
    for (int i = 0; i < box.site_count(); ++i) csv << "," << traj.states[k].action(i);
    csv << "\n";
  }
  write_file(outdir / "trajectory.csv", csv.str());

  DriftReport drift = action_drift_report(traj, cfg.sigma, cfg.eps);
  json dj;
  dj["format_version"] = kFormatVersion;
  dj["config"] = cfg.echo;
  dj["weighted_sup"] = drift.weighted_sup;
  if (drift.escape_time)
    dj["escape_time"] = *drift.escape_time;
  else
    dj["escape_time"] = nullptr;
  dj["per_site"] = drift.per_site_max;
  write_file(outdir / "drift_report.json", dj.dump(2) + "\n");

  std::ostringstream loc;
  loc.precision(17);
  loc << "# latosc locality format_version=" << kFormatVersion << " config=" << cfg.echo.dump()
      << "\n";
  loc << "site,max_drift,ratio,boundary\n";
  for (const LocalityRow& row : locality_profile(traj, cfg.sigma, cfg.eps)) {
    for (int i = 0; i < row.site.dim(); ++i) loc << (i ? ";" : "") << row.site[i];
    loc << "," << row.max_drift << "," << row.ratio << "," << (row.boundary ? 1 : 0) << "\n";
  }
  write_file(outdir / "locality.csv", loc.str());

  if (drift.escape_time) {
    std::cout << "escape at t=" << *drift.escape_time << "\n";
    return 1;
  }
  std::cout << "no escape within horizon; weighted drift sup " << drift.weighted_sup << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice oscillator normal-form and localization toolkit"};
  app.require_subcommand(1);

  std::string config_path, output_dir = ".", hook;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;
  int threads = 1;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON config file");
    if (needs_config) opt->required();
    sub->add_option("--output", output_dir, "output directory");
    sub->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { have_seed_override = true; });
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--hook", hook)->group("");  // test hooks, hidden
  };

  CLI::App* selftest = app.add_subcommand("selftest", "run the oracle property suites");
  add_common(selftest, false);
  CLI::App* nonres = app.add_subcommand("nonres", "check (eta,M)-non-resonance");
  add_common(nonres, true);
  CLI::App* measure = app.add_subcommand("measure", "Monte-Carlo resonant-set fraction");
  add_common(measure, true);
  CLI::App* normal_form = app.add_subcommand("normal-form", "run the normal form iteration");
  add_common(normal_form, true);
  CLI::App* simulate = app.add_subcommand("simulate", "integrate and report action drift");
  add_common(simulate, true);

  CLI11_PARSE(app, argc, argv);

  std::set<std::string> base{"d", "L", "sigma", "eps", "eta", "M", "seed"};
  auto allowed_for = [&](const std::string& cmd) {
    std::set<std::string> allowed = base;
    allowed.insert("media");
    if (cmd != "measure") allowed.insert("inner");  // measure samples zeta itself
    if (cmd == "measure") allowed.insert("trials");
    if (cmd == "normal-form") {
      allowed.insert("perturbation");
      allowed.insert("perturbation_coeff");
      allowed.insert("resume_from");
    }
    if (cmd == "simulate") {
      for (const char* k : {"dt", "T", "sample_every", "variables", "perturbation",
                            "perturbation_coeff", "init_amplitude", "init_origin_zero"})
        allowed.insert(k);
    }
    return allowed;
  };

  std::optional<std::uint64_t> seed_opt;
  if (have_seed_override) seed_opt = seed_override;

  std::filesystem::path outdir(output_dir);
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);

  try {
    if (selftest->parsed()) return cmd_selftest(hook);
    if (nonres->parsed()) {
      RunConfig cfg = load_config(config_path, allowed_for("nonres"), {"d", "L"}, seed_opt);
      return cmd_nonres(cfg, outdir);
    }
    if (measure->parsed()) {
      RunConfig cfg =
          load_config(config_path, allowed_for("measure"), {"d", "L", "trials"}, seed_opt);
      return cmd_measure(cfg, outdir, threads);
    }
    if (normal_form->parsed()) {
      RunConfig cfg = load_config(config_path, allowed_for("normal-form"), {"d", "L"}, seed_opt);
      return cmd_normal_form(cfg, outdir);
    }
    if (simulate->parsed()) {
      RunConfig cfg =
          load_config(config_path, allowed_for("simulate"), {"d", "L", "dt", "T"}, seed_opt);
      return cmd_simulate(cfg, outdir, hook);
    }
  } catch (const FlowIntegrationFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const StepUnstable& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
