#include "h3d/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include "CLI11.hpp"

#include "h3d/analysis.hpp"
#include "h3d/config.hpp"
#include "h3d/eval.hpp"
#include "h3d/kitti.hpp"
#include "h3d/train.hpp"

namespace h3d {

namespace fs = std::filesystem;

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream o(p, std::ios::binary | std::ios::trunc);
  if (!o) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  o << content;
  o.close();
  if (!o) throw std::runtime_error(fmt::format("error while writing '{}'", path));
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigOpts {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one configuration key (key=value); repeatable");
  }
  RunConfig resolve() const { return resolve_config(file, sets); }
};

Box3D parse_box_arg(const std::string& text, const char* which) {
  std::vector<double> v;
  try {
    v = parse_double_list(text);
  } catch (const ConfigError& e) {
    throw UsageError(fmt::format("{}: {}", which, e.what()));
  }
  if (v.size() != 7) {
    throw UsageError(fmt::format("{}: expected 7 comma-separated numbers x,y,z,l,w,h,yaw, got {}", which, v.size()));
  }
  try {
    return Box3D::make(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const std::domain_error& e) {
    throw UsageError(fmt::format("{}: {}", which, e.what()));
  }
}

int cmd_gradcheck(std::uint64_t n, double tol, double tol_abs, std::uint64_t seed, const ConfigOpts& co,
                  std::ostream& out) {
  const RunConfig cfg = co.resolve();
  const GradcheckReport r = gradcheck(n, tol, seed, tol_abs, cfg.train.loss);
  out << format_report(r);
  out << (r.failures == 0 ? "PASS\n" : "FAIL\n");
  return r.failures == 0 ? kExitOk : kExitContract;
}

int cmd_gradfield(const std::string& partial, const std::string& loss, const std::string& path, int resolution,
                  int dir_gt, const ConfigOpts& co, std::ostream& out) {
  const RunConfig cfg = co.resolve();
  GradFieldSpec spec = GradFieldSpec::defaults(parse_partial(partial), parse_loss_kind(loss));
  spec.resolution = resolution;
  spec.dir_gt = dir_gt != 0;
  spec.cfg = cfg.train.loss;
  spec.validate();
  const auto field = sample_grad_field(spec);
  std::ostringstream csv;
  write_field_csv(csv, field);
  write_text_file(path, csv.str());
  write_text_file(path + ".json", field_spec_json(spec));
  out << fmt::format("wrote {} samples of the {} {} field to {}\n", field.size(), loss, partial, path);
  return kExitOk;
}

int cmd_synth_train(const std::string& loss, const std::string& out_dir, const ConfigOpts& co, std::ostream& out) {
  RunConfig cfg = co.resolve();
  if (!loss.empty()) cfg.train.loss_kind = parse_loss_kind(loss);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  cfg.validate();
  const TrainResult res = train(cfg.train, cfg.scene);
  const fs::path dir(cfg.output_dir);
  write_text_file((dir / "history.json").string(), history_json(cfg.train, res.history));
  write_text_file((dir / "model.json").string(), model_to_json(res.model));
  write_text_file((dir / "config.txt").string(), dump_config(cfg));
  if (res.history.empty()) {
    out << "0 epochs: wrote the initial model\n";
  } else {
    const EpochRecord& e = res.history.back();
    out << fmt::format("epoch {} loss {:.6g} ap_07 {:.6g} ap_05 {:.6g} aos_07 {:.6g} pearson_r {}\n", e.epoch, e.loss,
                       e.val_ap_07, e.val_ap_05, e.val_aos_07,
                       e.val_pearson_r ? fmt::format("{:.6g}", *e.val_pearson_r) : std::string("undefined"));
  }
  out << fmt::format("wrote {}\n", cfg.output_dir);
  return kExitOk;
}

int cmd_synth_bench(int seeds, const std::string& out_dir, const ConfigOpts& co, std::ostream& out) {
  RunConfig cfg = co.resolve();
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  cfg.validate();
  if (seeds <= 0) throw UsageError("--seeds must be positive");
  std::vector<std::uint64_t> list;
  for (int s = 0; s < seeds; ++s) list.push_back(static_cast<std::uint64_t>(s));
  const auto rows = run_benchmark(cfg.train, cfg.scene, list);
  const std::string path = (fs::path(cfg.output_dir) / "bench.csv").string();
  write_text_file(path, bench_csv(rows));
  const BenchVerdict v = bench_verdict(rows);
  auto opt = [](const std::optional<double>& x) { return x ? fmt::format("{:.6g}", *x) : std::string("undefined"); };
  out << bench_csv(rows);
  out << fmt::format("median pearson_r  baseline {}  harmonic {}\n", opt(v.median_r_baseline), opt(v.median_r_harmonic));
  out << fmt::format("median ap_07      baseline {:.6g}  harmonic {:.6g}\n", v.median_ap07_baseline,
                     v.median_ap07_harmonic);
  out << fmt::format("consistency {}  accuracy {}\n", v.consistency_ok ? "pass" : "fail", v.accuracy_ok ? "pass" : "fail");
  out << fmt::format("wrote {}\n", path);
  return kExitOk;
}

int cmd_evaluate(const std::string& gt_dir, const std::string& pred_dir, const std::string& thresholds,
                 const std::string& iou_kind, const std::string& cls, const std::string& json_path, const ConfigOpts& co,
                 std::ostream& out, std::ostream& err) {
  RunConfig cfg = co.resolve();
  if (!thresholds.empty()) cfg.eval.thresholds = parse_double_list(thresholds);
  if (!iou_kind.empty()) cfg.eval.iou_kind = parse_iou_kind(iou_kind);
  cfg.validate();

  const auto gt_files = list_label_files(gt_dir);
  const auto pred_files = list_label_files(pred_dir);
  for (const auto& [stem, path] : pred_files) {
    if (!gt_files.count(stem)) err << fmt::format("warning: prediction file without ground truth ignored: {}\n", path);
  }
  std::vector<FrameResult> frames;
  for (const auto& [stem, path] : gt_files) {
    FrameResult f;
    for (const auto& r : parse_label_file(path)) {
      if (r.type == cls) f.gts.push_back(kitti_to_box3d(r));
    }
    const auto it = pred_files.find(stem);
    if (it != pred_files.end()) {
      for (const auto& r : parse_label_file(it->second)) {
        if (r.type == cls) f.dets.push_back({kitti_to_box3d(r), r.score.value_or(1.0)});
      }
    }
    frames.push_back(std::move(f));
  }
  const EvalSummary s = evaluate(frames, cfg.eval.thresholds, cfg.eval.iou_kind);
  out << fmt::format("frames {}  class {}\n", frames.size(), cls);
  out << summary_table(s);
  const std::string path = json_path.empty() ? (fs::path(cfg.output_dir) / "eval_summary.json").string() : json_path;
  write_text_file(path, summary_json(s));
  out << fmt::format("wrote {}\n", path);
  return kExitOk;
}

int cmd_iou(const std::string& a, const std::string& b, std::ostream& out) {
  const Box3D ba = parse_box_arg(a, "--box-a");
  const Box3D bb = parse_box_arg(b, "--box-b");
  out << fmt::format("bev {:.6f}\n3d {:.6f}\n", bev_iou(ba, bb), iou_3d(ba, bb));
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harmonic 3D detection loss toolkit"};
  app.name(args.empty() ? "h3d" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  // gradcheck
  std::uint64_t gc_n = 10000, gc_seed = 0;
  double gc_tol = 1e-6, gc_tol_abs = 1e-9;
  ConfigOpts gc_cfg;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic loss gradients with finite differences");
  gc->add_option("--n", gc_n, "number of random samples")->capture_default_str();
  gc->add_option("--tol", gc_tol, "relative error tolerance")->capture_default_str();
  gc->add_option("--tol-abs", gc_tol_abs, "absolute tolerance for near-zero partials")->capture_default_str();
  gc->add_option("--seed", gc_seed, "sampling seed")->capture_default_str();
  gc_cfg.attach(gc);

  // gradfield
  std::string gf_partial, gf_loss = "harmonic", gf_out;
  int gf_res = 22, gf_dir_gt = 0;
  ConfigOpts gf_cfg;
  auto* gf = app.add_subcommand("gradfield", "sample a gradient field over a 3D grid and write it as CSV");
  gf->add_option("--partial", gf_partial, "cls | reg | dir")->required();
  gf->add_option("--loss", gf_loss, "baseline | harmonic")->capture_default_str();
  gf->add_option("--out", gf_out, "CSV path; a .json sidecar describes the axes")->required();
  gf->add_option("--resolution", gf_res, "grid points per axis")->capture_default_str();
  gf->add_option("--dir-gt", gf_dir_gt, "direction label used by the dir field (0 or 1)")->capture_default_str();
  gf_cfg.attach(gf);

  // synth-train
  std::string st_loss, st_out;
  ConfigOpts st_cfg;
  auto* st = app.add_subcommand("synth-train", "train the toy detector on synthetic scenes");
  st->add_option("--loss", st_loss, "baseline | harmonic (overrides train.loss_kind)");
  st->add_option("--out", st_out, "output directory (overrides output.dir)");
  st_cfg.attach(st);

  // synth-bench
  int sb_seeds = 10;
  std::string sb_out;
  ConfigOpts sb_cfg;
  auto* sb = app.add_subcommand("synth-bench", "baseline vs harmonic over seeds 0..N-1");
  sb->add_option("--seeds", sb_seeds, "number of seeds")->capture_default_str();
  sb->add_option("--out", sb_out, "output directory (overrides output.dir)");
  sb_cfg.attach(sb);

  // evaluate
  std::string ev_gt, ev_pred, ev_thr, ev_kind, ev_cls = "Car", ev_json;
  ConfigOpts ev_cfg;
  auto* ev = app.add_subcommand("evaluate", "AP40 / AOS40 evaluation of KITTI-format label directories");
  ev->add_option("--gt-dir", ev_gt, "ground-truth label directory")->required();
  ev->add_option("--pred-dir", ev_pred, "prediction label directory")->required();
  ev->add_option("--thresholds", ev_thr, "comma-separated IoU thresholds (overrides eval.thresholds)");
  ev->add_option("--iou-kind", ev_kind, "bev | 3d (overrides eval.iou_kind)");
  ev->add_option("--class", ev_cls, "object type to evaluate")->capture_default_str();
  ev->add_option("--out", ev_json, "summary JSON path (default <output.dir>/eval_summary.json)");
  ev_cfg.attach(ev);

  // iou
  std::string io_a, io_b;
  auto* io = app.add_subcommand("iou", "BEV and 3D IoU of two boxes");
  io->add_option("--box-a", io_a, "x,y,z,l,w,h,yaw")->required();
  io->add_option("--box-b", io_b, "x,y,z,l,w,h,yaw")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("h3d");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (gc->parsed()) return cmd_gradcheck(gc_n, gc_tol, gc_tol_abs, gc_seed, gc_cfg, out);
    if (gf->parsed()) return cmd_gradfield(gf_partial, gf_loss, gf_out, gf_res, gf_dir_gt, gf_cfg, out);
    if (st->parsed()) return cmd_synth_train(st_loss, st_out, st_cfg, out);
    if (sb->parsed()) return cmd_synth_bench(sb_seeds, sb_out, sb_cfg, out);
    if (ev->parsed()) return cmd_evaluate(ev_gt, ev_pred, ev_thr, ev_kind, ev_cls, ev_json, ev_cfg, out, err);
    if (io->parsed()) return cmd_iou(io_a, io_b, out);
  } catch (const TrainDivergence& e) {
    err << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const EvalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace h3d
