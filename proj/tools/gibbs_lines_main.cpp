#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gibbs_lines/experiments.hpp"
#include "gibbs_lines/io.hpp"
#include "gibbs_lines/mcmc.hpp"

namespace gl = gibbs_lines;
namespace fs = std::filesystem;

namespace {

// Flag > environment > local fallback.
fs::path resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("GIBBS_LINES_OUT"); env && *env) return env;
  return "gibbs-lines-out";
}

gl::BoundaryCurve boundary_from_token(const std::string& token) {
  return gl::BoundaryCurve::constant(gl::ExtendedReal(gl::parse_value(token)));
}

std::vector<long long> endpoints_or_zeros(std::vector<long long> values, int k,
                                          const std::string& what) {
  if (values.empty()) return std::vector<long long>(static_cast<std::size_t>(k), 0);
  if (static_cast<int>(values.size()) != k)
    throw gl::ConfigError(what + " needs exactly one lattice index per curve");
  return values;
}

gl::ChainState chain_from(const gl::Grid& grid, int k, const std::vector<long long>& x,
                          const std::vector<long long>& y, const std::string& f_token,
                          const std::string& g_token) {
  std::vector<gl::DiscretePath> paths;
  paths.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    paths.push_back(gl::maximal_path(grid, x[static_cast<std::size_t>(i)],
                                     y[static_cast<std::size_t>(i)]));
  }
  return gl::ChainState(gl::EnsembleState(grid, std::move(paths),
                                          boundary_from_token(f_token),
                                          boundary_from_token(g_token)));
}

struct RunArgs {
  std::string experiment;
  std::string config_path;
  std::string out_dir;
  long long seed = 0;
  bool seed_set = false;
  int workers = 1;
};

int do_run(const RunArgs& args) {
  gl::Config overrides =
      args.config_path.empty() ? gl::Config() : gl::Config::parse_file(args.config_path);
  if (args.seed_set) overrides.set("seed", gl::ConfigValue::of_int(args.seed));

  const auto ids = gl::expand_experiment_group(args.experiment);
  const fs::path base = resolve_out_dir(args.out_dir);
  const bool group = ids.size() > 1;

  bool all_pass = true;
  for (const auto& id : ids) {
    const auto start = std::chrono::steady_clock::now();
    auto output = gl::run_experiment(id, overrides, args.workers);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    output.report.wall_seconds = elapsed.count();

    const fs::path dir = group ? base / id : base;
    gl::write_report_files(output.report, dir);
    if (!output.data_csv.empty()) gl::write_text_file(dir / "data.csv", output.data_csv);

    std::cout << "experiment " << id << " (seed " << output.report.seed << ")\n";
    for (const auto& criterion : output.report.criteria)
      std::cout << "  " << gl::format_criterion_line(criterion) << '\n';
    std::cout << "  wall clock: " << output.report.wall_seconds << " s\n"
              << "  report: " << (dir / "report.json").string() << '\n';
    all_pass = all_pass && output.report.pass();
  }
  return all_pass ? 0 : 1;
}

struct SampleArgs {
  std::string hamiltonian = "exponential:1";
  double a = 0.0;
  double b = 1.0;
  int n = 4;
  int k = 1;
  std::vector<long long> x;
  std::vector<long long> y;
  std::string f = "inf";
  std::string g = "-inf";
  long long samples = 10;
  long long burn_in = -1;
  long long thinning = -1;
  long long seed = 1;
  bool boundaries = false;
  std::string out;
};

int do_sample(const SampleArgs& args) {
  if (args.samples <= 0) throw gl::ConfigError("--samples must be positive");
  const auto H = gl::parse_hamiltonian(args.hamiltonian);
  const auto grid = gl::make_grid(args.a, args.b, args.n);
  const auto x = endpoints_or_zeros(args.x, args.k, "--x");
  const auto y = endpoints_or_zeros(args.y, args.k, "--y");
  auto chain = chain_from(grid, args.k, x, y, args.f, args.g);

  gl::RunConfig rc;
  rc.seed = static_cast<std::uint64_t>(args.seed);
  const std::uint64_t burn = args.burn_in >= 0 ? static_cast<std::uint64_t>(args.burn_in)
                                               : gl::default_burn_in(args.k, args.n);
  const std::uint64_t thin = args.thinning > 0 ? static_cast<std::uint64_t>(args.thinning)
                                               : gl::default_thinning(args.k, args.n);
  rc.burn_in = burn;
  rc.thinning = thin;
  rc.event_budget = burn + static_cast<std::uint64_t>(args.samples) * thin;

  std::vector<gl::EnsembleState> states;
  states.reserve(static_cast<std::size_t>(args.samples));
  auto rng = gl::seed_policy(rc.seed, 0);
  const auto result = gl::run_chain(chain, H, rc, rng, [&](const gl::ChainState& s) {
    states.push_back(s.to_ensemble());
  });

  if (args.out.empty() || args.out == "-") {
    gl::export_paths(std::cout, states, args.boundaries);
  } else {
    std::ofstream file(args.out, std::ios::binary);
    if (!file) throw gl::ConfigError("cannot open '" + args.out + "' for writing");
    gl::export_paths(file, states, args.boundaries);
    std::cerr << "wrote " << states.size() << " states (" << result.events
              << " events, " << result.accepted << " accepted) to " << args.out << '\n';
  }
  return 0;
}

struct CoupleArgs {
  std::string hamiltonian = "exponential:1";
  double a = 0.0;
  double b = 1.0;
  int n = 4;
  int k = 2;
  std::vector<long long> bottom_x;
  std::vector<long long> bottom_y;
  std::vector<long long> top_x;
  std::vector<long long> top_y;
  std::string f_bottom = "inf";
  std::string f_top = "inf";
  std::string g_bottom = "-inf";
  std::string g_top = "-inf";
  long long events = 100000;
  long long seed = 1;
  bool allow_nonconvex = false;
  std::string out;
};

int do_couple(const CoupleArgs& args) {
  if (args.events <= 0) throw gl::ConfigError("--events must be positive");
  const auto H = gl::parse_hamiltonian(args.hamiltonian);
  const auto grid = gl::make_grid(args.a, args.b, args.n);
  const auto bottom_x = endpoints_or_zeros(args.bottom_x, args.k, "--bottom-x");
  const auto bottom_y = endpoints_or_zeros(args.bottom_y, args.k, "--bottom-y");
  auto lifted = [&](const std::vector<long long>& base, std::vector<long long> given,
                    const std::string& what) {
    if (!given.empty()) {
      if (static_cast<int>(given.size()) != args.k)
        throw gl::ConfigError(what + " needs exactly one lattice index per curve");
      return given;
    }
    auto out = base;
    for (auto& v : out) v += 2;
    return out;
  };
  const auto top_x = lifted(bottom_x, args.top_x, "--top-x");
  const auto top_y = lifted(bottom_y, args.top_y, "--top-y");

  gl::CoupledState coupled{
      chain_from(grid, args.k, bottom_x, bottom_y, args.f_bottom, args.g_bottom),
      chain_from(grid, args.k, top_x, top_y, args.f_top, args.g_top)};

  gl::RunConfig rc;
  rc.event_budget = static_cast<std::uint64_t>(args.events);
  rc.seed = static_cast<std::uint64_t>(args.seed);
  rc.allow_nonconvex = args.allow_nonconvex;
  auto rng = gl::seed_policy(rc.seed, 0);

  std::uint64_t violations = 0;
  std::uint64_t events_run = 0;
  std::optional<std::uint64_t> first_violation;
  try {
    const auto result = gl::run_coupled(coupled, H, rc, rng);
    violations = result.violations;
    events_run = result.events;
    if (result.first_violation) first_violation = result.first_violation->event_index;
  } catch (const gl::CouplingOrderError& err) {
    violations = 1;
    events_run = err.trace.event_index;
    first_violation = err.trace.event_index;
  }

  std::cout << "events: " << events_run << '\n' << "violations: " << violations << '\n';
  if (first_violation) std::cout << "first violation at event " << *first_violation << '\n';

  if (!args.out.empty()) {
    const fs::path dir(args.out);
    fs::create_directories(dir);
    auto dump = [&](const gl::ChainState& state, const char* name) {
      std::ofstream file(dir / name, std::ios::binary);
      if (!file) throw gl::ConfigError(std::string("cannot open output file ") + name);
      gl::export_paths(file, state.to_ensemble(), true);
    };
    dump(coupled.bottom, "bottom.csv");
    dump(coupled.top, "top.csv");
    auto summary = gl::ReportJson::object();
    summary["events"] = events_run;
    summary["violations"] = violations;
    if (first_violation) {
      summary["first_violation_event"] = *first_violation;
    } else {
      summary["first_violation_event"] = nullptr;
    }
    gl::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "outputs in " << dir.string() << '\n';
  }
  return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbsian line ensemble experiments and samplers"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a catalog experiment and write its report");
  run->add_option("experiment", run_args.experiment,
                  "Experiment id: E1..E7, E4a, E4b, E7a, E7b, or lambda")
      ->required();
  run->add_option("--config", run_args.config_path, "TOML file overriding the defaults")
      ->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", run_args.seed, "Master seed override");
  run->add_option("--out", run_args.out_dir,
                  "Output directory (default $GIBBS_LINES_OUT, else ./gibbs-lines-out)");
  run->add_option("--workers", run_args.workers, "Worker threads for sampling replicas")
      ->check(CLI::Range(1, 256));

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Sample ensemble states to a paths CSV");
  sample->add_option("--hamiltonian", sample_args.hamiltonian, "Interaction name");
  sample->add_option("--a", sample_args.a, "Interval start");
  sample->add_option("--b", sample_args.b, "Interval end");
  sample->add_option("--n", sample_args.n, "Lattice size (n^2 steps)")
      ->check(CLI::Range(1, 64));
  sample->add_option("--k", sample_args.k, "Number of curves")->check(CLI::Range(1, 16));
  sample->add_option("--x", sample_args.x, "Entrance lattice indices (default zeros)")
      ->delimiter(',');
  sample->add_option("--y", sample_args.y, "Exit lattice indices (default zeros)")
      ->delimiter(',');
  sample->add_option("--f", sample_args.f, "Top boundary: number, inf, or -inf");
  sample->add_option("--g", sample_args.g, "Bottom boundary: number, inf, or -inf");
  sample->add_option("--samples", sample_args.samples, "States to emit");
  sample->add_option("--burn-in", sample_args.burn_in, "Events before sampling");
  sample->add_option("--thinning", sample_args.thinning, "Events between samples");
  sample->add_option("--seed", sample_args.seed, "Master seed");
  sample->add_flag("--boundaries", sample_args.boundaries,
                   "Include boundary curves as first and last columns");
  sample->add_option("--out", sample_args.out, "Output file (default stdout)");

  CoupleArgs couple_args;
  auto* couple = app.add_subcommand("couple", "Drive two chains on shared randomness");
  couple->add_option("--hamiltonian", couple_args.hamiltonian, "Interaction name");
  couple->add_option("--a", couple_args.a, "Interval start");
  couple->add_option("--b", couple_args.b, "Interval end");
  couple->add_option("--n", couple_args.n, "Lattice size (n^2 steps)")
      ->check(CLI::Range(1, 64));
  couple->add_option("--k", couple_args.k, "Number of curves")->check(CLI::Range(1, 16));
  couple->add_option("--bottom-x", couple_args.bottom_x, "Bottom entrance indices")
      ->delimiter(',');
  couple->add_option("--bottom-y", couple_args.bottom_y, "Bottom exit indices")
      ->delimiter(',');
  couple->add_option("--top-x", couple_args.top_x,
                     "Top entrance indices (default bottom + 2)")
      ->delimiter(',');
  couple->add_option("--top-y", couple_args.top_y, "Top exit indices (default bottom + 2)")
      ->delimiter(',');
  couple->add_option("--f-bottom", couple_args.f_bottom, "Bottom ensemble top boundary");
  couple->add_option("--f-top", couple_args.f_top, "Top ensemble top boundary");
  couple->add_option("--g-bottom", couple_args.g_bottom, "Bottom ensemble bottom boundary");
  couple->add_option("--g-top", couple_args.g_top, "Top ensemble bottom boundary");
  couple->add_option("--events", couple_args.events, "Shared event budget");
  couple->add_option("--seed", couple_args.seed, "Master seed");
  couple->add_flag("--allow-nonconvex", couple_args.allow_nonconvex,
                   "Count order violations instead of failing fast");
  couple->add_option("--out", couple_args.out, "Directory for final states and summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      run_args.seed_set = seed_opt->count() > 0;
      return do_run(run_args);
    }
    if (sample->parsed()) return do_sample(sample_args);
    if (couple->parsed()) return do_couple(couple_args);
  } catch (const gl::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::domain_error& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 2;
}
