#include "cli/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "cli/output.hpp"
#include "json.hpp"
#include "lenmap/activation.hpp"
#include "lenmap/errors.hpp"
#include "lenmap/length_map.hpp"
#include "lenmap/simulator.hpp"
#include "lenmap/stats.hpp"
#include "lenmap/version.hpp"

namespace lenmap::cli {
namespace {

using json = nlohmann::json;

struct Options {
  std::string act;
  double sw = 1.0;
  double sb = 0.0;
  std::size_t depth = 1;
  std::vector<std::size_t> widths;
  std::uint64_t trials = 100;
  double eps = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
  std::string capture;
  std::string input = "all-ones";
  unsigned workers = 0;

  // cauchy
  int bins = 200;
  std::string range;
  std::size_t per_init = 0;

  // independence
  int resamples = 200;

  // audit
  double min_abs = ProbeGrid{}.min_abs;
  double max_abs = ProbeGrid{}.max_abs;
  int points = ProbeGrid{}.points_per_sign;

  // replay
  std::string manifest;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  ArtifactDir dir;
  json config = json::object();
};

std::size_t parse_size(std::string_view text, const char* what) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view text, const char* what) {
  const std::string s(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(value)) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" + s + "'");
  }
  return value;
}

InputSpec parse_input(const std::string& text, std::uint64_t seed) {
  if (text == "all-ones") return {InputPattern::all_ones, seed};
  if (text == "alternating") return {InputPattern::alternating, seed};
  if (text == "random-signs") return {InputPattern::random_signs, seed};
  throw std::invalid_argument("bad --input '" + text + "' (all-ones, alternating, random-signs)");
}

// layer:all | layer:u | layer:u,v,... | layer:a-b, units 0-based
CaptureSpec parse_capture(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--capture expects layer:units");
  CaptureSpec spec;
  spec.layer = parse_size(std::string_view(text).substr(0, colon), "capture layer");
  if (spec.layer == 0) throw std::invalid_argument("capture layer must be >= 1");
  const std::string rest = text.substr(colon + 1);
  if (rest == "all") return spec;
  std::stringstream pieces(rest);
  std::string piece;
  while (std::getline(pieces, piece, ',')) {
    const auto dash = piece.find('-');
    if (dash == std::string::npos) {
      spec.units.push_back(parse_size(piece, "capture unit"));
      continue;
    }
    const std::size_t a = parse_size(std::string_view(piece).substr(0, dash), "capture unit");
    const std::size_t b = parse_size(std::string_view(piece).substr(dash + 1), "capture unit");
    if (b < a) throw std::invalid_argument("empty capture range '" + piece + "'");
    for (std::size_t u = a; u <= b; ++u) spec.units.push_back(u);
  }
  if (spec.units.empty()) throw std::invalid_argument("no capture units in '" + text + "'");
  return spec;
}

json capture_json(const CaptureSpec& spec) {
  return {{"layer", spec.layer},
          {"units", spec.units.empty() ? json("all") : json(spec.units)}};
}

json model_json(const Options& o, const Activation& act) {
  return {{"activation", act.name()}, {"sigma_w", o.sw}, {"sigma_b", o.sb}};
}

void print(Context& ctx, const std::string& text) { ctx.out << text; }

void cmd_lengthmap(const Options& o, Context& ctx) {
  const Activation act = Activation::parse(o.act);
  const LengthMap map = compute_length_map(act, o.sw, o.sb, o.depth);
  ctx.config = model_json(o, act);
  ctx.config["depth"] = o.depth;

  std::string csv = csv_row({"layer", "qtilde", "trtilde", "status"});
  std::string table;
  char line[128];
  std::snprintf(line, sizeof(line), "%5s  %24s  %24s  %s\n", "layer", "qtilde", "trtilde", "status");
  table += line;
  json layers = json::array();
  for (std::size_t l = 0; l <= map.depth; ++l) {
    const std::string status(to_string(map.status[l]));
    csv += csv_row({std::to_string(l), format_real(map.qtilde[l]), format_real(map.trtilde[l]), status});
    std::snprintf(line, sizeof(line), "%5zu  %24s  %24s  %s\n", l, format_real(map.qtilde[l]).c_str(),
                  format_real(map.trtilde[l]).c_str(), status.c_str());
    table += line;
    layers.push_back({{"layer", l}, {"qtilde", map.qtilde[l]}, {"trtilde", map.trtilde[l]}, {"status", status}});
  }
  json report = ctx.config;
  const auto bad = map.first_nonfinite();
  report["first_nonfinite_layer"] = bad ? json(*bad) : json(nullptr);
  report["layers"] = std::move(layers);

  ctx.dir.write("lengthmap.csv", csv);
  ctx.dir.write("lengthmap.json", report.dump(2) + "\n");
  print(ctx, o.json ? report.dump(2) + "\n" : table);
}

void cmd_converge(const Options& o, Context& ctx) {
  ConvergenceRequest req;
  req.activation = Activation::parse(o.act);
  req.sigma_w = o.sw;
  req.sigma_b = o.sb;
  req.depth = o.depth;
  req.widths = o.widths;
  req.trials = o.trials;
  req.epsilon = o.eps;
  req.seed = o.seed;
  req.input = parse_input(o.input, o.seed);
  req.workers = o.workers;
  ctx.config = model_json(o, req.activation);
  ctx.config.update({{"depth", o.depth}, {"widths", o.widths}, {"trials", o.trials},
                     {"epsilon", o.eps}, {"input", o.input}});

  const ConvergenceReport rep = convergence_report(req);

  std::string csv = csv_row({"width", "layer", "success_fraction", "ci_lo", "ci_hi", "successes", "trials"});
  json widths = json::array();
  for (const WidthConvergence& w : rep.widths) {
    json layers = json::array();
    for (std::size_t l = 1; l <= o.depth; ++l) {
      const BinomialInterval& ci = w.layer_ci[l - 1];
      csv += csv_row({std::to_string(w.width), std::to_string(l), format_real(w.layer_fraction[l - 1]),
                      format_real(ci.lo), format_real(ci.hi), std::to_string(w.layer_successes[l - 1]),
                      std::to_string(w.trials)});
      layers.push_back({{"layer", l}, {"successes", w.layer_successes[l - 1]},
                        {"success_fraction", w.layer_fraction[l - 1]}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}});
    }
    csv += csv_row({std::to_string(w.width), "all", format_real(w.success_fraction), format_real(w.ci.lo),
                    format_real(w.ci.hi), std::to_string(w.successes), std::to_string(w.trials)});
    widths.push_back({{"width", w.width}, {"trials", w.trials}, {"successes", w.successes},
                      {"success_fraction", w.success_fraction}, {"ci_lo", w.ci.lo}, {"ci_hi", w.ci.hi},
                      {"overflow_count", w.overflow_count}, {"layers", std::move(layers)}});
  }
  json report = ctx.config;
  report["qtilde"] = rep.length_map.qtilde;
  report["nondecreasing_within_ci"] = rep.nondecreasing_within_ci();
  report["results"] = std::move(widths);

  ctx.dir.write("converge.csv", csv);
  ctx.dir.write("converge.json", report.dump(2) + "\n");
  print(ctx, o.json ? report.dump(2) + "\n" : csv);
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--range expects lo:hi");
  const double lo = parse_real(std::string_view(text).substr(0, colon), "range");
  const double hi = parse_real(std::string_view(text).substr(colon + 1), "range");
  if (!(lo < hi)) throw std::invalid_argument("--range needs lo < hi");
  return {lo, hi};
}

void append_histogram(std::string& csv, std::size_t width, const std::string& init, const Histogram& h) {
  const double total = static_cast<double>(h.total());
  for (int k = 0; k < h.spec().bins; ++k) {
    const double count = static_cast<double>(h.counts()[k]);
    const double density = total > 0 ? count / (total * h.bin_width()) : 0.0;
    csv += csv_row({std::to_string(width), init, format_real(h.bin_lo(k)), format_real(h.bin_hi(k)),
                    std::to_string(h.counts()[k]), format_real(density)});
  }
}

void cmd_cauchy(const Options& o, Context& ctx) {
  const Activation act = Activation::parse(o.act);
  CaptureSpec capture = parse_capture(o.capture);
  const std::size_t depth = o.depth == 0 ? capture.layer : o.depth;
  if (capture.layer > depth) throw std::invalid_argument("capture layer exceeds --depth");
  capture.captured_rows_only = capture.layer == depth && !capture.units.empty();
  std::optional<std::pair<double, double>> range;
  if (!o.range.empty()) range = parse_range(o.range);
  if (o.bins < 1) throw std::invalid_argument("--bins must be >= 1");
  const InputSpec input = parse_input(o.input, o.seed);
  const std::vector<std::size_t> widths = o.widths.empty() ? std::vector<std::size_t>{10, 100, 1000} : o.widths;

  ctx.config = model_json(o, act);
  ctx.config.update({{"depth", depth}, {"widths", widths}, {"trials", o.trials}, {"capture", capture_json(capture)},
                     {"bins", o.bins}, {"range", o.range.empty() ? json("auto") : json(o.range)},
                     {"per_init", o.per_init}, {"input", o.input}});

  std::string csv = csv_row({"width", "init", "bin_lo", "bin_hi", "count", "density"});
  json results = json::array();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const std::size_t n = widths[k];
    NetworkConfig cfg;
    cfg.width = n;
    cfg.depth = depth;
    cfg.sigma_w = o.sw;
    cfg.sigma_b = o.sb;
    cfg.input = input;
    cfg.activation = act;
    cfg.master_seed = o.seed + k;

    const double ref_scale = std::sqrt(static_cast<double>(n));
    HistogramSpec hspec;
    hspec.bins = o.bins;
    hspec.lo = range ? range->first : -10.0 * ref_scale;
    hspec.hi = range ? range->second : 10.0 * ref_scale;

    EnsembleOptions opts;
    opts.capture = capture;
    opts.histogram = hspec;
    opts.workers = o.workers;
    const EnsembleStats stats = simulate_ensemble(cfg, o.trials, opts);

    append_histogram(csv, n, "all", *stats.histogram);
    const std::size_t stride = stats.stride;
    for (std::size_t t = 0; t < o.per_init && t < stats.reservoir_trials.size(); ++t) {
      Histogram h(hspec);
      h.add(std::span<const double>(stats.reservoir).subspan(t * stride, stride));
      append_histogram(csv, n, std::to_string(stats.reservoir_trials[t]), h);
    }

    const std::span<const double> samples(stats.reservoir);
    const DistributionFit fit = fit_and_test_distribution(samples, Reference::cauchy(0.0, ref_scale));
    const double ks_fitted_cauchy = ks_statistic(samples, [&](double x) {
      return cauchy_cdf(x, fit.cauchy_location, fit.cauchy_scale);
    });
    results.push_back({{"width", n},
                       {"seed", cfg.master_seed},
                       {"trials", stats.trial_count},
                       {"overflow_trials", stats.overflow_count},
                       {"samples", fit.sample_count},
                       {"reference_location", 0.0},
                       {"reference_scale", ref_scale},
                       {"cauchy_location", fit.cauchy_location},
                       {"cauchy_scale", fit.cauchy_scale},
                       {"scale_ratio", fit.cauchy_scale / ref_scale},
                       {"gaussian_sigma", fit.gaussian_sigma},
                       {"ks_vs_reference_cauchy", fit.ks_vs_cauchy},
                       {"ks_vs_fitted_cauchy", ks_fitted_cauchy},
                       {"ks_vs_fitted_gaussian", fit.ks_vs_gaussian},
                       {"histogram_underflow", stats.histogram->underflow()},
                       {"histogram_overflow", stats.histogram->overflow()}});
  }
  json report = ctx.config;
  report["results"] = std::move(results);

  ctx.dir.write("cauchy_hist.csv", csv);
  ctx.dir.write("cauchy_fit.json", report.dump(2) + "\n");
  print(ctx, o.json ? report.dump(2) + "\n" : csv);
}

void cmd_independence(const Options& o, Context& ctx) {
  const Activation act = Activation::parse(o.act);
  CaptureSpec capture = parse_capture(o.capture);
  if (capture.units.size() != 2) throw std::invalid_argument("--capture must name exactly two units");
  if (o.widths.size() > 1) throw std::invalid_argument("independence takes a single --width");
  const std::size_t n = o.widths.empty() ? 10 : o.widths.front();
  const std::size_t depth = o.depth == 0 ? capture.layer : o.depth;
  if (capture.layer > depth) throw std::invalid_argument("capture layer exceeds --depth");
  capture.captured_rows_only = capture.layer == depth;

  ctx.config = model_json(o, act);
  ctx.config.update({{"depth", depth}, {"width", n}, {"trials", o.trials}, {"capture", capture_json(capture)},
                     {"resamples", o.resamples}, {"input", o.input}});

  NetworkConfig cfg;
  cfg.width = n;
  cfg.depth = depth;
  cfg.sigma_w = o.sw;
  cfg.sigma_b = o.sb;
  cfg.input = parse_input(o.input, o.seed);
  cfg.activation = act;
  cfg.master_seed = o.seed;
  EnsembleOptions opts;
  opts.capture = capture;
  opts.workers = o.workers;
  const EnsembleStats stats = simulate_ensemble(cfg, o.trials, opts);

  const std::vector<double> a = stats.captured_column(0);
  const std::vector<double> b = stats.captured_column(1);
  CrossMomentResult res = cross_moment_gap(a, b, o.seed, o.resamples);
  try {
    res.theoretical_gap = theoretical_gap(act, o.sw, o.sb, n);
  } catch (const UnsupportedActivationError&) {
    res.theoretical_gap = std::numeric_limits<double>::quiet_NaN();
  }
  const bool has_theory = !std::isnan(res.theoretical_gap);

  json report = ctx.config;
  report.update({{"gap_estimate", res.gap_estimate},
                 {"std_error", res.std_error},
                 {"theoretical_gap", has_theory ? json(res.theoretical_gap) : json(nullptr)},
                 {"z_vs_zero", res.z_score},
                 {"z_vs_theory",
                  has_theory ? json((res.gap_estimate - res.theoretical_gap) / res.std_error) : json(nullptr)},
                 {"pairs", res.pairs},
                 {"overflow_trials", stats.overflow_count}});
  ctx.dir.write("independence.json", report.dump(2) + "\n");
  print(ctx, report.dump(2) + "\n");
}

void cmd_audit(const Options& o, Context& ctx) {
  const Activation act = Activation::parse(o.act);
  ProbeGrid grid;
  grid.min_abs = o.min_abs;
  grid.max_abs = o.max_abs;
  grid.points_per_sign = o.points;
  ctx.config = {{"activation", act.name()}, {"min_abs", o.min_abs}, {"max_abs", o.max_abs},
                {"points_per_sign", o.points}};

  const PermissibilityReport rep = audit_permissibility(act, grid);
  json report = ctx.config;
  report.update({{"verdict", std::string(to_string(rep.verdict))},
                 {"growth_hint", std::string(to_string(act.growth_hint()))},
                 {"interval_bounded", rep.interval_bounded},
                 {"growth_exponent_estimate", rep.growth_exponent_estimate},
                 {"probe_lo", rep.probe_lo},
                 {"probe_hi", rep.probe_hi},
                 {"max_abs_value", rep.max_abs_value},
                 {"max_abs_at", rep.max_abs_at},
                 {"notes", rep.notes}});
  ctx.dir.write("audit.json", report.dump(2) + "\n");
  print(ctx, report.dump(2) + "\n");
}

std::vector<std::string> replay_args(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream file(manifest_path);
  if (!file) throw std::invalid_argument("cannot read manifest '" + manifest_path + "'");
  json manifest;
  try {
    manifest = json::parse(file);
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("argv") || !manifest["argv"].is_array()) {
    throw std::invalid_argument("manifest has no argv");
  }
  const auto stored = manifest["argv"].get<std::vector<std::string>>();
  if (!stored.empty() && stored.front() == "replay") throw std::invalid_argument("cannot replay a replay");
  std::vector<std::string> args;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i] == "--out") {
      ++i;
      continue;
    }
    if (stored[i].rfind("--out=", 0) == 0) continue;
    args.push_back(stored[i]);
  }
  if (!out_dir.empty()) {
    args.push_back("--out");
    args.push_back(out_dir);
  }
  return args;
}

void add_model_flags(CLI::App* cmd, Options& o, const char* default_act) {
  o.act = default_act;
  cmd->add_option("--act", o.act, "activation: relu, heaviside, tanh, identity, reciprocal, zero, "
                                  "exp_square:<alpha>, optionally prefixed by scale:<c>:")
      ->capture_default_str();
  cmd->add_option("--sw", o.sw, "weight standard deviation (not variance)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--sb", o.sb, "bias standard deviation (not variance)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
  cmd->add_option("--input", o.input, "x0 pattern: all-ones, alternating, random-signs")->capture_default_str();
  cmd->add_option("--workers", o.workers, "worker threads (0: LENMAP_WORKERS or all cores)")
      ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "directory for artifacts and manifest.json");
  cmd->add_flag("--json", o.json, "print JSON instead of the table / CSV");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();

  CLI::App app{"Length maps and finite-width length processes of random networks", "lenmap"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options lm;
  auto* lengthmap = app.add_subcommand("lengthmap", "deterministic length map per layer");
  add_model_flags(lengthmap, lm, "relu");
  lengthmap->add_option("--depth", lm.depth, "layers")->check(CLI::PositiveNumber)->capture_default_str();
  add_output_flags(lengthmap, lm);

  Options cv;
  auto* converge = app.add_subcommand("converge", "per-width agreement of the length process with the map");
  add_model_flags(converge, cv, "relu");
  converge->add_option("--depth", cv.depth, "layers")->check(CLI::PositiveNumber)->capture_default_str();
  converge->add_option("--width", cv.widths, "width, repeatable, increasing")->required()->delimiter(',');
  converge->add_option("--trials", cv.trials, "trials per width")->capture_default_str();
  converge->add_option("--eps", cv.eps, "tolerance on |q - qtilde|")->capture_default_str();
  add_run_flags(converge, cv);
  add_output_flags(converge, cv);

  Options ca;
  ca.depth = 0;
  ca.capture = "2:all";
  auto* cauchy = app.add_subcommand("cauchy", "histograms and Cauchy(0, sqrt(N)) fit of captured pre-activations");
  add_model_flags(cauchy, ca, "reciprocal");
  cauchy->add_option("--depth", ca.depth, "layers (default: capture layer)");
  cauchy->add_option("--width", ca.widths, "width, repeatable (default 10, 100, 1000)")->delimiter(',');
  cauchy->add_option("--trials", ca.trials, "random initializations per width")->capture_default_str();
  cauchy->add_option("--capture", ca.capture, "layer:all | layer:u | layer:u,v | layer:a-b")->capture_default_str();
  cauchy->add_option("--bins", ca.bins, "histogram bins")->capture_default_str();
  cauchy->add_option("--range", ca.range, "histogram lo:hi (default -10 sqrt(N):10 sqrt(N))");
  cauchy->add_option("--per-init", ca.per_init, "also histogram each of the first K initializations")
      ->capture_default_str();
  add_run_flags(cauchy, ca);
  add_output_flags(cauchy, ca);

  Options in;
  in.depth = 0;
  in.trials = 100000;
  in.capture = "2:0,1";
  auto* independence = app.add_subcommand("independence", "cross-moment gap of two pre-activation units");
  add_model_flags(independence, in, "heaviside");
  independence->add_option("--depth", in.depth, "layers (default: capture layer)");
  independence->add_option("--width", in.widths, "width (default 10)");
  independence->add_option("--trials", in.trials, "trials")->capture_default_str();
  independence->add_option("--capture", in.capture, "layer:u,v")->capture_default_str();
  independence->add_option("--resamples", in.resamples, "bootstrap resamples")->capture_default_str();
  add_run_flags(independence, in);
  add_output_flags(independence, in);

  Options au;
  auto* audit = app.add_subcommand("audit", "numerical permissibility evidence for an activation");
  add_model_flags(audit, au, "relu");
  audit->add_option("--min-abs", au.min_abs, "smallest probed |x|")->capture_default_str();
  audit->add_option("--max-abs", au.max_abs, "largest probed |x|")->capture_default_str();
  audit->add_option("--points", au.points, "probe points per sign")->capture_default_str();
  add_output_flags(audit, au);

  Options rp;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("--manifest", rp.manifest, "manifest.json")->required();
  replay->add_option("--out", rp.out, "directory for the new artifacts (default: stdout only)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  if (replay->parsed()) {
    try {
      return run_cli(replay_args(rp.manifest, rp.out), out, err);
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
  }

  const Options& o = lengthmap->parsed() ? lm
                     : converge->parsed() ? cv
                     : cauchy->parsed()   ? ca
                     : independence->parsed() ? in
                                              : au;
  std::string command;
  try {
    Context ctx{out, err, ArtifactDir(o.out)};
    if (lengthmap->parsed()) {
      command = "lengthmap";
      cmd_lengthmap(o, ctx);
    } else if (converge->parsed()) {
      command = "converge";
      cmd_converge(o, ctx);
    } else if (cauchy->parsed()) {
      command = "cauchy";
      cmd_cauchy(o, ctx);
    } else if (independence->parsed()) {
      command = "independence";
      cmd_independence(o, ctx);
    } else {
      command = "audit";
      cmd_audit(o, ctx);
    }
    if (ctx.dir.active()) {
      ManifestInfo info;
      info.command = command;
      info.argv = args;
      info.config = ctx.config;
      info.seed = o.seed;
      info.workers = resolve_workers(o.workers);
      info.started = started;
      info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_manifest(ctx.dir, info);
    }
  } catch (const MapDivergedError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lenmap::cli
