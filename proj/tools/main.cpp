#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mcgi/error.hpp"

using namespace mcgi::cli;

int main(int argc, char** argv) {
  CLI::App app{"mcgi: LID-adaptive proximity graph index"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic base/query/ground-truth triple");
  g->add_option("--kind", gen.kind, "uniform-ball | gaussian-clusters | embedded-manifold | mixed-lid")
      ->capture_default_str();
  g->add_option("--n", gen.n, "base points")->capture_default_str();
  g->add_option("--dim", gen.dim, "ambient dimension")->capture_default_str();
  g->add_option("--intrinsic-dim", gen.intrinsic_dim, "intrinsic dimension")->capture_default_str();
  g->add_option("--intrinsic-dim-low", gen.intrinsic_dim_low,
                "mixed-lid: intrinsic dimension of the first block")
      ->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--noise", gen.noise, "isotropic Gaussian noise stddev")->capture_default_str();
  g->add_option("--queries", gen.queries)->capture_default_str();
  g->add_option("--k", gen.k, "ground-truth depth")->capture_default_str();
  g->add_option("--out-dir", gen.out_dir)->capture_default_str();

  BuildOptions build;
  double fixed_alpha = 0.0;
  auto* b = app.add_subcommand("build", "calibrate, build and save an index");
  b->add_option("--base", build.base, "base .fvecs/.bvecs")->required();
  b->add_option("--out", build.out, "index path; the profile goes to <out>.lid")
      ->capture_default_str();
  b->add_option("--R", build.R, "max out-degree")->capture_default_str();
  b->add_option("--L-build", build.L_build, "construction beam width")->capture_default_str();
  b->add_option("--alpha-min", build.alpha_min)->capture_default_str();
  b->add_option("--alpha-max", build.alpha_max)->capture_default_str();
  b->add_option("--k-lid", build.k_lid, "neighbors per LID estimate")->capture_default_str();
  b->add_option("--iters", build.iters, "refinement passes")->capture_default_str();
  b->add_option("--seed", build.seed)->capture_default_str();
  auto* fixed = b->add_option("--fixed-alpha", fixed_alpha, "uniform alpha (baseline mode)");
  b->add_flag("--uncapped", build.uncapped, "no degree cap (verification)");
  b->add_option("--threads", build.threads, "0 = all cores")->capture_default_str();
  b->add_option("--block-size", build.block_size, "0 = smallest fitting, >= 4096")
      ->capture_default_str();

  SweepOptions sweep;
  std::string disk_mode = "memory";
  auto* s = app.add_subcommand("sweep", "recall / throughput sweep over beam widths (CSV)");
  s->add_option("--index", sweep.index)->required();
  s->add_option("--queries", sweep.queries)->required();
  s->add_option("--gt", sweep.gt, "ground truth .ivecs")->required();
  s->add_option("--profile", sweep.profile, "LID profile (default <index>.lid)");
  s->add_option("--L-list", sweep.L_list,
                "beam widths; adaptive rows use L as beam_min, or as beam_max with --beam-min")
      ->delimiter(',')
      ->capture_default_str();
  s->add_flag("--adaptive", sweep.adaptive);
  s->add_option("--lambda", sweep.lambda)->capture_default_str();
  s->add_option("--beam-min", sweep.beam_min, "fixed adaptive beam_min");
  s->add_option("--beam-max", sweep.beam_max, "adaptive cap when --beam-min is unset")
      ->capture_default_str();
  s->add_option("--pilot-beam", sweep.pilot_beam)->capture_default_str();
  s->add_option("--pilot-k", sweep.pilot_k)->capture_default_str();
  s->add_option("--threads", sweep.threads, "0 = all cores")->capture_default_str();
  s->add_option("--disk-mode", disk_mode)
      ->check(CLI::IsMember({"memory", "buffered", "unbuffered"}))
      ->capture_default_str();

  VerifyOptions verify;
  std::uint32_t capped_R = 0;
  auto* v = app.add_subcommand("verify", "EMST/RNG inclusion and reachability on an uncapped build");
  v->add_option("--base", verify.base)->required();
  v->add_option("--R", verify.R, "initial random degree")->capture_default_str();
  v->add_option("--L-build", verify.L_build, "0 = n")->capture_default_str();
  v->add_option("--alpha-min", verify.alpha_min)->capture_default_str();
  v->add_option("--alpha-max", verify.alpha_max)->capture_default_str();
  v->add_option("--k-lid", verify.k_lid)->capture_default_str();
  v->add_option("--iters", verify.iters)->capture_default_str();
  v->add_option("--seed", verify.seed)->capture_default_str();
  auto* capped = v->add_option("--capped-R", capped_R, "also report a capped build");

  LidStatsOptions lid;
  auto* l = app.add_subcommand("lid-stats", "per-node LID CSV and summary");
  l->add_option("--base", lid.base)->required();
  l->add_option("--k-lid", lid.k_lid)->capture_default_str();
  l->add_option("--csv", lid.csv, "CSV path (default stdout)");

  RoutingOptions routing;
  auto* r = app.add_subcommand("routing-difficulty", "greedy routing success versus intrinsic dimension");
  r->add_option("--dims", routing.dims)->delimiter(',')->capture_default_str();
  r->add_option("--n", routing.n)->capture_default_str();
  r->add_option("--trials", routing.trials)->capture_default_str();
  r->add_option("--seed", routing.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_gen(gen, std::cout);
    if (*b) {
      if (*fixed) build.fixed_alpha = fixed_alpha;
      return run_build(build, std::cout);
    }
    if (*s) {
      static const std::map<std::string, DiskMode> modes{
          {"memory", DiskMode::memory},
          {"buffered", DiskMode::buffered},
          {"unbuffered", DiskMode::unbuffered}};
      sweep.disk_mode = modes.at(disk_mode);
      return run_sweep(sweep, std::cout);
    }
    if (*v) {
      if (*capped) verify.capped_R = capped_R;
      return run_verify(verify, std::cout);
    }
    if (*l) return run_lid_stats(lid, std::cout);
    if (*r) return run_routing_difficulty(routing, std::cout);
  } catch (const mcgi::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
