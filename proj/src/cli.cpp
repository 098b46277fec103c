#include "zeroflow/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeroflow/blanket.hpp"
#include "zeroflow/checkpoint.hpp"
#include "zeroflow/config.hpp"
#include "zeroflow/dataset_io.hpp"
#include "zeroflow/datagen.hpp"
#include "zeroflow/errors.hpp"
#include "zeroflow/flowdiag.hpp"
#include "zeroflow/server.hpp"
#include "zeroflow/trainer.hpp"

namespace fs = std::filesystem;

namespace zf {

namespace {

/// Inconsistent or missing flags detected after parsing (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared flag groups

/// Training hyperparameters: flag > --config file > built-in default.
struct TrainFlags {
  std::string config;
  TrainConfig values;
  std::string zf_mode = "midpoint";
  std::vector<std::pair<CLI::Option*, void (*)(TrainConfig&, const TrainFlags&)>> set;

  void add(CLI::App* app) {
    app->add_option("--config", config, "TOML file with training hyperparameters")->check(CLI::ExistingFile);
    reg(app->add_option("--lr", values.lr, "Adam learning rate"), [](TrainConfig& c, const TrainFlags& f) { c.lr = f.values.lr; });
    reg(app->add_option("--batch-size", values.batch_size, "rows per batch"),
        [](TrainConfig& c, const TrainFlags& f) { c.batch_size = f.values.batch_size; });
    reg(app->add_option("--iterations", values.iterations, "optimizer steps"),
        [](TrainConfig& c, const TrainFlags& f) { c.iterations = f.values.iterations; });
    reg(app->add_option("--lambda", values.lambda_sparsity, "gate sparsity weight"),
        [](TrainConfig& c, const TrainFlags& f) { c.lambda_sparsity = f.values.lambda_sparsity; });
    reg(app->add_option("--bandwidth", values.omega_bandwidth, "time-weight bandwidth (kernel mode)"),
        [](TrainConfig& c, const TrainFlags& f) { c.omega_bandwidth = f.values.omega_bandwidth; });
    reg(app->add_option("--beta-alpha", values.beta_alpha, "t ~ Beta(alpha, alpha)"),
        [](TrainConfig& c, const TrainFlags& f) { c.beta_alpha = f.values.beta_alpha; });
    reg(app->add_option("--zf-weight", values.zf_weight, "weight of the zero-flow term"),
        [](TrainConfig& c, const TrainFlags& f) { c.zf_weight = f.values.zf_weight; });
    reg(app->add_option("--zf-mode", zf_mode, "midpoint | kernel")->check(CLI::IsMember({"midpoint", "kernel"})),
        [](TrainConfig& c, const TrainFlags& f) { c.zf_mode = parse_zf_mode(f.zf_mode); });
    reg(app->add_option("--weight-decay", values.weight_decay, "decoupled weight decay"),
        [](TrainConfig& c, const TrainFlags& f) { c.weight_decay = f.values.weight_decay; });
    reg(app->add_option("--train-seed", values.seed, "seed for initialization and batches"),
        [](TrainConfig& c, const TrainFlags& f) { c.seed = f.values.seed; });
    reg(app->add_option("--encoder-hidden", values.encoder_hidden, "gate network width"),
        [](TrainConfig& c, const TrainFlags& f) { c.encoder_hidden = f.values.encoder_hidden; });
    reg(app->add_option("--velocity-hidden", values.velocity_hidden, "velocity network width"),
        [](TrainConfig& c, const TrainFlags& f) { c.velocity_hidden = f.values.velocity_hidden; });
  }

  void reg(CLI::Option* opt, void (*apply)(TrainConfig&, const TrainFlags&)) { set.emplace_back(opt, apply); }

  TrainConfig resolve(std::optional<std::uint64_t> seed_override = std::nullopt) const {
    TrainConfig cfg;
    if (!config.empty()) cfg = load_train_config(config, cfg);
    if (seed_override) cfg.seed = *seed_override;
    for (const auto& [opt, apply] : set) {
      if (opt->count() > 0) apply(cfg, *this);
    }
    cfg.validate();
    return cfg;
  }
};

struct MaskFlags {
  std::string kind = "one-hot";
  std::size_t window_len = 5;
  std::size_t side = 0;
  double include_prob = 0.5;
  double p = 0.5;

  void add(CLI::App* app) {
    app->add_option("--mask", kind, "training masks: one-hot | window | lattice | bernoulli")
        ->check(CLI::IsMember({"one-hot", "window", "lattice", "bernoulli"}));
    app->add_option("--window-len", window_len, "window mask length");
    app->add_option("--side", side, "lattice side (default: sqrt(d))");
    app->add_option("--include-prob", include_prob, "lattice neighbour inclusion probability");
    app->add_option("--p", p, "bernoulli mask probability");
  }

  MaskStrategy strategy(std::size_t d) const {
    if (kind == "one-hot") return OneHotMasks{};
    if (kind == "window") return WindowMasks{window_len};
    if (kind == "bernoulli") return BernoulliMasks{p};
    std::size_t s = side;
    if (s == 0) s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    return LatticeMasks{s, include_prob};
  }
};

struct DataFlags {
  std::string graph = "chain";
  std::size_t d = 50;
  std::size_t k = 3;
  std::size_t side = 8;
  double lattice_weight = 0.3;
  std::string transform = "gaussian";
  double gamma = 3.0;
  double tau = -0.75;
  std::size_t n = 2048;

  void add(CLI::App* app, bool with_side) {
    app->add_option("--graph", graph, "chain | lattice")->check(CLI::IsMember({"chain", "lattice"}));
    app->add_option("--d", d, "chain length");
    app->add_option("--k", k, "chain order");
    if (with_side) app->add_option("--side", side, "lattice side");
    app->add_option("--lattice-weight", lattice_weight, "lattice coupling");
    app->add_option("--transform", transform, "gaussian | nonparanormal | truncated")
        ->check(CLI::IsMember({"gaussian", "nonparanormal", "truncated"}));
    app->add_option("--gamma", gamma, "nonparanormal exponent");
    app->add_option("--tau", tau, "truncation threshold");
    app->add_option("--n", n, "number of samples");
  }

  GraphSpec graph_spec() const {
    if (graph == "lattice") return LatticeSpec{side, lattice_weight, 1.0};
    if (k == 0) throw UsageError("--k must be >= 1");
    // 0.8, 0.4, 0.2, then continued halving for longer ranges.
    std::vector<double> w;
    double v = 0.8;
    for (std::size_t i = 0; i < k; ++i, v *= 0.5) w.push_back(v);
    return ChainSpec{d, w, 1.0};
  }

  MarginalTransform marginal() const {
    if (transform == "nonparanormal") return NonparanormalMarginals{gamma};
    if (transform == "truncated") return TruncatedMarginals{tau};
    return GaussianMarginals{};
  }
};

// ---------------------------------------------------------------------------
// Pipelines

void write_dataset_and_theta(const Dataset& data, const PrecisionMatrix& theta, const fs::path& out) {
  write_dataset_csv(data, out / "data.csv");
  write_matrix_csv(theta.theta, out / "theta.csv");
}

TrainResult train_and_save(const Dataset& data, const MaskStrategy& strategy, const TrainConfig& cfg,
                           const fs::path& out, EncoderKind encoder = EncoderKind::Amortized) {
  TrainResult res = train(data, strategy, cfg, {encoder, 50, {}});
  if (data.meta.contains("feature_names")) {
    res.checkpoint.meta.feature_names = data.meta.at("feature_names").get<std::vector<std::string>>();
  }
  save_checkpoint(res.checkpoint, out / "ckpt.json");
  write_loss_csv(res.history, out / "loss.csv");
  return res;
}

void write_resolved(const TrainConfig& cfg, const fs::path& out) {
  const std::string text = to_toml(cfg);
  std::cout << text;
  if (text.empty() || text.back() != '\n') std::cout << '\n';
  write_text_file(out / "resolved.toml", text + (text.empty() || text.back() != '\n' ? "\n" : ""));
}

double eval_roc_files(const Checkpoint& ckpt, const Tensor& theta, const fs::path& out) {
  if (theta.rank() != 2 || theta.rows() != ckpt.d || theta.cols() != ckpt.d) {
    throw DataError("dimension mismatch: checkpoint has d=" + std::to_string(ckpt.d) + " but theta is " +
                    shape_str(theta.shape()));
  }
  const EdgeScores es = edge_scores(ckpt, theta);
  const RocCurve roc = roc_auc(es.scores, es.labels);
  std::size_t edges = 0;
  for (int y : es.labels.values) edges += static_cast<std::size_t>(y);
  write_roc_csv(roc, out / "roc.csv");
  const nlohmann::json summary = {{"auc", roc.auc}, {"edges", edges}, {"non_edges", es.labels.values.size() - edges}};
  write_text_file(out / "auc.json", summary.dump(2) + "\n");
  return roc.auc;
}

std::vector<double> parse_csv_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ParameterError(std::string("invalid ") + what + " entry '" + cell + "'");
    }
  }
  return out;
}

Checkpoint load_ckpt_checked(const std::string& path) { return load_checkpoint(path); }

// ---------------------------------------------------------------------------
// Field dumps

void dump_field_1d(const VelocityField& field, const fs::path& path) {
  std::string text = "z,t,v\n";
  const Tensor z = z_grid();
  for (double t : t_grid()) {
    const Tensor v = field(z, t);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      text += format_double(z[i]) + ',' + format_double(t) + ',' + format_double(v[i]) + '\n';
    }
  }
  write_text_file(path, text);
}

Tensor grid_2d(double lo, double hi, std::size_t steps) {
  Tensor g({steps * steps, 2});
  const double h = (hi - lo) / static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < steps; ++j) {
      g(i * steps + j, 0) = lo + h * static_cast<double>(j);
      g(i * steps + j, 1) = lo + h * static_cast<double>(i);
    }
  }
  return g;
}

void dump_field_2d(const VelocityField& field, const Tensor& grid, std::span<const double> times, const fs::path& path) {
  std::string text = "x,y,t,vx,vy\n";
  for (double t : times) {
    const Tensor v = field(grid, t);
    for (std::size_t r = 0; r < grid.rows(); ++r) {
      text += format_double(grid(r, 0)) + ',' + format_double(grid(r, 1)) + ',' + format_double(t) + ',' +
              format_double(v(r, 0)) + ',' + format_double(v(r, 1)) + '\n';
    }
  }
  write_text_file(path, text);
}

void dump_sufficiency_field(const SufficiencyNet& net, const fs::path& path) {
  const Tensor grid = grid_2d(-3.0, 3.0, 25);
  const std::size_t k = grid.rows();
  Tensor x({k}), fy({k}), y({k});
  for (std::size_t r = 0; r < k; ++r) {
    x[r] = grid(r, 0);
    y[r] = grid(r, 1);
    fy[r] = net.f(y[r]);
  }
  const Tensor v = net(x, fy, y, 0.5);
  std::string text = "x,y,t,vx,vy\n";
  for (std::size_t r = 0; r < k; ++r) {
    text += format_double(x[r]) + ',' + format_double(y[r]) + ",0.5," + format_double(v[r]) + ",0\n";
  }
  write_text_file(path, text);
}

double mean_row_norm(const Tensor& v) {
  double total = 0.0;
  const std::size_t d = v.cols();
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += v(r, j) * v(r, j);
    total += std::sqrt(s);
  }
  return total / static_cast<double>(v.rows());
}

// ---------------------------------------------------------------------------

int dispatch(CLI::App& app, const std::vector<std::string>& args) {
  app.require_subcommand(1);

  // gen-data
  DataFlags gen;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "sample a graphical-model dataset");
  gen.add(gen_cmd, true);
  gen_cmd->add_option("--seed", gen_seed, "sampling seed");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // train
  TrainFlags tr;
  MaskFlags tr_mask;
  std::string tr_data, tr_out, tr_encoder = "amortized";
  CLI::App* tr_cmd = app.add_subcommand("train", "train the encoder and velocity field");
  tr_cmd->add_option("--data", tr_data, "dataset CSV")->required()->check(CLI::ExistingFile);
  tr_mask.add(tr_cmd);
  tr.add(tr_cmd);
  tr_cmd->add_option("--encoder", tr_encoder, "amortized | fixed")->check(CLI::IsMember({"amortized", "fixed"}));
  tr_cmd->add_option("--out", tr_out, "output directory (default: the data directory)");

  // eval-roc
  std::string ev_ckpt, ev_theta, ev_out, ev_seeds;
  DataFlags ev_data;
  TrainFlags ev_tr;
  MaskFlags ev_mask;
  CLI::App* ev_cmd = app.add_subcommand("eval-roc", "structure recovery ROC/AUC");
  ev_cmd->add_option("--ckpt", ev_ckpt, "checkpoint JSON")->check(CLI::ExistingFile);
  ev_cmd->add_option("--theta", ev_theta, "ground-truth precision CSV")->check(CLI::ExistingFile);
  ev_cmd->add_option("--seeds", ev_seeds, "comma-separated seeds: generate, train and evaluate per seed");
  ev_data.add(ev_cmd, false);
  ev_mask.add(ev_cmd);
  ev_tr.add(ev_cmd);
  ev_cmd->add_option("--out", ev_out, "output directory (default: the checkpoint directory)");

  // demo
  CLI::App* demo_cmd = app.add_subcommand("demo", "flow diagnostics with field dumps");
  demo_cmd->require_subcommand(1);
  std::string zf_dist = "mixture2d", zf_out;
  std::size_t zf_n = 2048;
  std::uint64_t zf_seed = 0;
  TrainFlags zf_tr;
  CLI::App* zf_cmd = demo_cmd->add_subcommand("zeroflow", "unconditional flow between two samples of one law");
  zf_cmd->add_option("--dist", zf_dist, "mixture2d | normal | shifted")
      ->check(CLI::IsMember({"mixture2d", "normal", "shifted"}));
  zf_cmd->add_option("--n", zf_n, "samples per side");
  zf_cmd->add_option("--seed", zf_seed, "sampling seed");
  zf_tr.add(zf_cmd);
  zf_cmd->add_option("--out", zf_out, "output directory")->required();

  std::string suf_out;
  std::size_t suf_n = 2048;
  std::uint64_t suf_seed = 0;
  TrainFlags suf_tr;
  CLI::App* suf_cmd = demo_cmd->add_subcommand("sufficiency", "fixed statistics sigmoid(-2y) vs sin(2y)");
  suf_cmd->add_option("--n", suf_n, "samples");
  suf_cmd->add_option("--seed", suf_seed, "sampling seed");
  suf_tr.add(suf_cmd);
  suf_cmd->add_option("--out", suf_out, "output directory")->required();

  // query
  std::string q_ckpt, q_mask, q_window, q_out;
  double q_threshold = 0.1;
  std::size_t q_topk = 0;
  CLI::App* q_cmd = app.add_subcommand("query", "gates and blanket for one target mask");
  q_cmd->add_option("--ckpt", q_ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  auto* q_mask_opt = q_cmd->add_option("--mask", q_mask, "comma-separated 0/1 entries");
  auto* q_window_opt = q_cmd->add_option("--window", q_window, "start:length window mask");
  q_mask_opt->excludes(q_window_opt);
  auto* q_th_opt = q_cmd->add_option("--threshold", q_threshold, "select gates above this value (default 0.1)");
  auto* q_topk_opt = q_cmd->add_option("--topk", q_topk, "select the k largest gates");
  q_th_opt->excludes(q_topk_opt);
  q_cmd->add_option("--out", q_out, "also write query.json here");

  // market
  std::string mk_csv, mk_ckpt, mk_out;
  bool mk_row_labels = false;
  std::size_t mk_window = 5, mk_topk = 50;
  TrainFlags mk_tr;
  CLI::App* mk_cmd = app.add_subcommand("market", "past/future split of windowed blankets");
  mk_cmd->add_option("--csv", mk_csv, "entity x day price table")->required()->check(CLI::ExistingFile);
  mk_cmd->add_flag("--row-labels", mk_row_labels, "first column holds entity names");
  mk_cmd->add_option("--ckpt", mk_ckpt, "checkpoint (default: train one with window masks)")->check(CLI::ExistingFile);
  mk_cmd->add_option("--window", mk_window, "window length");
  mk_cmd->add_option("--topk", mk_topk, "blanket size");
  mk_tr.add(mk_cmd);
  mk_cmd->add_option("--out", mk_out, "output directory")->required();

  // serve
  std::string sv_ckpt, sv_addr = "127.0.0.1:8080", sv_ui;
  std::size_t sv_max_body = 1 << 20;
  CLI::App* sv_cmd = app.add_subcommand("serve", "HTTP blanket queries");
  sv_cmd->add_option("--ckpt", sv_ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  sv_cmd->add_option("--addr", sv_addr, "host:port");
  sv_cmd->add_option("--ui-dir", sv_ui, "serve static files from this directory at /")->check(CLI::ExistingDirectory);
  sv_cmd->add_option("--max-body", sv_max_body, "largest accepted request body in bytes");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen_cmd) {
    const fs::path out = gen_out;
    const GraphSpec spec = gen.graph_spec();
    const PrecisionMatrix theta = build_precision(spec);
    const Dataset data = generate(spec, gen.marginal(), gen.n, gen_seed);
    write_dataset_and_theta(data, theta, out);
    std::cout << "wrote " << (out / "data.csv").string() << " (" << data.n() << " x " << data.d() << ")\n";
    return 0;
  }

  if (*tr_cmd) {
    const fs::path data_path = tr_data;
    const fs::path out = tr_out.empty() ? data_path.parent_path() : fs::path(tr_out);
    const Dataset data = read_dataset_csv(data_path);
    const TrainConfig cfg = tr.resolve();
    write_resolved(cfg, out);
    const TrainResult res = train_and_save(data, tr_mask.strategy(data.d()), cfg, out,
                                           tr_encoder == "fixed" ? EncoderKind::Fixed : EncoderKind::Amortized);
    std::cout << "final loss " << format_double(res.history.back().loss.total) << "\n";
    return 0;
  }

  if (*ev_cmd) {
    if (!ev_seeds.empty()) {
      if (!ev_ckpt.empty() || !ev_theta.empty()) throw UsageError("--seeds cannot be combined with --ckpt/--theta");
      if (ev_out.empty()) throw UsageError("--seeds requires --out");
      const fs::path out = ev_out;
      std::vector<double> aucs;
      std::vector<std::uint64_t> seeds;
      for (double s : parse_csv_numbers(ev_seeds, "seed")) {
        if (s < 0 || s != std::floor(s)) throw UsageError("seeds must be non-negative integers");
        seeds.push_back(static_cast<std::uint64_t>(s));
      }
      const TrainConfig base = ev_tr.resolve();
      write_resolved(base, out);
      for (std::uint64_t seed : seeds) {
        const fs::path dir = out / ("seed-" + std::to_string(seed));
        const GraphSpec spec = ev_data.graph_spec();
        const PrecisionMatrix theta = build_precision(spec);
        const Dataset data = generate(spec, ev_data.marginal(), ev_data.n, seed);
        write_dataset_and_theta(data, theta, dir);
        TrainConfig cfg = base;
        cfg.seed = seed;
        const TrainResult res = train_and_save(data, ev_mask.strategy(data.d()), cfg, dir);
        aucs.push_back(eval_roc_files(res.checkpoint, theta.theta, dir));
        std::cout << "seed " << seed << " auc " << format_double(aucs.back()) << "\n";
      }
      double mean = 0.0;
      for (double a : aucs) mean += a;
      mean /= static_cast<double>(aucs.size());
      double ss = 0.0;
      for (double a : aucs) ss += (a - mean) * (a - mean);
      const double sd = aucs.size() > 1 ? std::sqrt(ss / static_cast<double>(aucs.size() - 1)) : 0.0;
      const nlohmann::json summary = {{"seeds", seeds}, {"auc", aucs}, {"mean", mean}, {"std", sd}};
      write_text_file(out / "auc.json", summary.dump(2) + "\n");
      std::cout << "mean auc " << format_double(mean) << " +- " << format_double(sd) << "\n";
      return 0;
    }
    if (ev_ckpt.empty() || ev_theta.empty()) throw UsageError("eval-roc needs --ckpt and --theta (or --seeds)");
    const fs::path out = ev_out.empty() ? fs::path(ev_ckpt).parent_path() : fs::path(ev_out);
    const Checkpoint ckpt = load_ckpt_checked(ev_ckpt);
    const Tensor theta = read_numeric_csv(ev_theta).values;
    const double auc = eval_roc_files(ckpt, theta, out);
    std::cout << "auc " << format_double(auc) << "\n";
    return 0;
  }

  if (*zf_cmd) {
    const fs::path out = zf_out;
    const TrainConfig cfg = zf_tr.resolve();
    write_resolved(cfg, out);
    const std::uint64_t sp = derive_seed(zf_seed, 10), sq = derive_seed(zf_seed, 11);
    Dataset p, q;
    double target_mean = 0.0, target_var = 1.0;
    if (zf_dist == "mixture2d") {
      p = mixture2d(zf_n, sp);
      q = mixture2d(zf_n, sq);
      target_var = 1.5 * 1.5 + 0.3 * 0.3;
    } else {
      p = gaussian_samples(zf_n, 1, 0.0, 1.0, sp);
      q = gaussian_samples(zf_n, 1, zf_dist == "shifted" ? 1.0 : 0.0, 1.0, sq);
      if (zf_dist == "shifted") target_mean = 1.0;
    }
    const UncondVelocityNet net = train_unconditional(p, q, cfg);
    const VelocityField field = as_field(net);
    const std::vector<double> times = t_grid();
    Tensor points;
    if (zf_dist == "mixture2d") {
      points = grid_2d(-3.0, 3.0, 21);
      const std::vector<double> dump_times{0.1, 0.5, 0.9};
      dump_field_2d(field, points, dump_times, out / "field_zeroflow.csv");
    } else {
      points = z_grid();
      dump_field_1d(field, out / "field_zeroflow.csv");
    }
    nlohmann::json report = to_json(diagnose(field, points, times, p.samples, target_mean, target_var));
    report["norm_t0.1"] = mean_row_norm(field(points, 0.1));
    report["dist"] = zf_dist;
    write_text_file(out / "diagnostics.json", report.dump(2) + "\n");
    std::cout << "midpoint norm " << format_double(report["midpoint_norm"].get<double>()) << ", t=0.1 norm "
              << format_double(report["norm_t0.1"].get<double>()) << "\n";
    return 0;
  }

  if (*suf_cmd) {
    const fs::path out = suf_out;
    const TrainConfig cfg = suf_tr.resolve();
    write_resolved(cfg, out);
    const Dataset demo = conditional_demo_data(suf_n, suf_seed);
    const SufficiencyResult good = train_sufficiency(demo, [](double y) { return sigmoid(-2.0 * y); }, cfg);
    const SufficiencyResult bad = train_sufficiency(demo, [](double y) { return std::sin(2.0 * y); }, cfg);
    dump_sufficiency_field(good.net, out / "field_sufficient.csv");
    dump_sufficiency_field(bad.net, out / "field_insufficient.csv");
    const nlohmann::json summary = {{"sufficient_score", good.score},
                                    {"insufficient_score", bad.score},
                                    {"ratio", bad.score / good.score}};
    write_text_file(out / "sufficiency.json", summary.dump(2) + "\n");
    std::cout << "score sigmoid(-2y) " << format_double(good.score) << ", sin(2y) " << format_double(bad.score)
              << "\n";
    return 0;
  }

  if (*q_cmd) {
    const Checkpoint ckpt = load_ckpt_checked(q_ckpt);
    Tensor mask;
    if (!q_mask.empty()) {
      mask = Tensor::vector(parse_csv_numbers(q_mask, "mask"));
    } else if (!q_window.empty()) {
      const auto colon = q_window.find(':');
      if (colon == std::string::npos) throw UsageError("--window expects start:length");
      const std::vector<double> a = parse_csv_numbers(q_window.substr(0, colon), "window start");
      const std::vector<double> b = parse_csv_numbers(q_window.substr(colon + 1), "window length");
      if (a.size() != 1 || b.size() != 1 || a[0] < 0 || b[0] < 1) throw UsageError("--window expects start:length");
      mask = window_mask(ckpt.d, static_cast<std::size_t>(a[0]), static_cast<std::size_t>(b[0]));
    } else {
      throw UsageError("query needs --mask or --window");
    }
    const BlanketRule rule = *q_topk_opt ? BlanketRule{TopKRule{q_topk}} : BlanketRule{ThresholdRule{q_threshold}};
    if (*q_topk_opt && q_topk == 0) throw UsageError("--topk must be positive");
    const std::string body = to_json(query_blanket(ckpt, mask, rule)).dump();
    std::cout << body << "\n";
    if (!q_out.empty()) write_text_file(fs::path(q_out) / "query.json", body + "\n");
    return 0;
  }

  if (*mk_cmd) {
    const fs::path out = mk_out;
    const Dataset data = ingest_market_csv(mk_csv, mk_row_labels);
    Checkpoint ckpt;
    if (!mk_ckpt.empty()) {
      ckpt = load_ckpt_checked(mk_ckpt);
    } else {
      const TrainConfig cfg = mk_tr.resolve();
      write_resolved(cfg, out);
      ckpt = train_and_save(data, WindowMasks{mk_window}, cfg, out).checkpoint;
    }
    const MarketReport rep = market_analysis(data, ckpt, mk_window, mk_topk);
    write_market_csv(rep, out / "market.csv");
    std::cout << "wrote " << rep.windows.size() << " windows to " << (out / "market.csv").string() << "\n";
    return 0;
  }

  if (*sv_cmd) {
    ServeOptions opts;
    std::tie(opts.host, opts.port) = parse_addr(sv_addr);
    if (!sv_ui.empty()) opts.ui_dir = sv_ui;
    opts.max_body_bytes = sv_max_body;
    BlanketServer server(load_ckpt_checked(sv_ckpt), opts);
    const int port = server.bind();
    std::cout << "listening on http://" << opts.host << ":" << port << std::endl;
    server.listen();
    return 0;
  }
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Zero-flow encoders: conditional-independence certificates and Markov blankets", "zeroflow"};
  try {
    return dispatch(app, args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace zf
