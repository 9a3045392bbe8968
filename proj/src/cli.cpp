#include "rcd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "rcd/checkpoint.hpp"
#include "rcd/commit_graph.hpp"
#include "rcd/embedding.hpp"
#include "rcd/error.hpp"
#include "rcd/evaluation.hpp"
#include "rcd/network_check.hpp"
#include "rcd/ranker.hpp"
#include "rcd/synthetic.hpp"

namespace rcd::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return "";
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

// Flags shared by every command that builds or trains a model.
struct ModelFlags {
  ModelConfig cfg;
  std::string mode = "full";
  std::string step = "commit";
  bool no_qkv_bias = false;
  std::size_t d_out = 0;
  CLI::Option* dim_opt = nullptr;

  void attach(CLI::App* app) {
    dim_opt = app->add_option("--dim", cfg.dim, "Embedding dimension D")->capture_default_str();
    app->add_option("--heads", cfg.heads, "Attention heads H")->capture_default_str();
    app->add_option("--layers", cfg.layers, "Stacked layers L")->capture_default_str();
    app->add_option("--d-out", d_out, "Task projection width (0 = same as --dim)");
    app->add_option("--mode", mode, "full | aggregation-only | retention-only")->capture_default_str();
    app->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();
    app->add_option("--sigma", cfg.sigma, "Pair-probability scale")->capture_default_str();
    app->add_flag("--ties", cfg.include_tie_pairs, "Train on tie pairs (label 0.5) as well");
    app->add_flag("--no-qkv-bias", no_qkv_bias, "Drop the key/query/value biases");
    app->add_option("--step", step, "Optimizer step unit: commit | pair")->capture_default_str();
  }

  // Resolves enums and the dimension of precomputed embeddings (0 = none).
  ModelConfig resolve(std::size_t precomputed = 0) {
    ModelConfig out = cfg;
    auto m = parse_mode(mode);
    if (!m) throw ConfigError("unknown mode '" + mode + "'");
    out.mode = *m;
    auto s = parse_step_unit(step);
    if (!s) throw ConfigError("unknown step unit '" + step + "'");
    out.step = *s;
    out.qkv_bias = !no_qkv_bias;
    if (precomputed != 0) {
      if (dim_opt && dim_opt->count() > 0 && out.dim != precomputed) {
        throw ConfigError("--dim " + std::to_string(out.dim) +
                          " does not match the dataset's precomputed embedding dim " +
                          std::to_string(precomputed));
      }
      out.dim = precomputed;
    }
    out.d_out = d_out == 0 ? out.dim : d_out;
    validate_config(out);
    return out;
  }
};

std::vector<EmbeddedGraph> embed_for(const Dataset& d, std::size_t dim, int jobs) {
  HashingEmbedder provider(dim);
  return embed_dataset(d, provider, jobs);
}

// ---- generate ----

struct GenerateCmd {
  GenConfig gen;
  std::string output;

  void attach(CLI::App* app) {
    app->add_option("--commits", gen.n_commits, "Number of commits")->capture_default_str();
    app->add_option("--deleted", gen.deleted_per_commit, "Deleted lines per commit")->capture_default_str();
    app->add_option("--added", gen.added_per_commit, "Added lines per commit")->capture_default_str();
    app->add_option("--density", gen.edge_density, "Random edge probability per node pair")->capture_default_str();
    app->add_option("--signal", gen.signal_strength,
                    "Probability that a root cause keeps its signal; 0 gives baseline-difficulty data")
        ->capture_default_str();
    app->add_flag("--structure-only", gen.structure_only, "Carry the signal only in edges");
    app->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    app->add_option("--name", gen.name, "Dataset name")->capture_default_str();
    app->add_option("-o,--output", output, "Output dataset file")->required();
  }

  int run(std::ostream& out) const {
    Dataset d = generate(gen);
    save_dataset(d, output);
    out << "wrote " << d.graphs.size() << " commits to " << output << "\n";
    return kExitOk;
  }
};

// ---- train ----

struct TrainCmd {
  ModelFlags model;
  std::string dataset, output, log_path;
  int jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("-d,--dataset", dataset, "Training dataset")->required();
    app->add_option("-o,--output", output, "Checkpoint to write")->required();
    app->add_option("--log", log_path, "Write the epoch,mean_loss CSV here instead of stdout");
    app->add_option("--jobs", jobs, "Worker threads for embedding")->capture_default_str();
    model.attach(app);
  }

  int run(std::ostream& out) {
    Dataset d = load_dataset(dataset);
    ModelConfig cfg = model.resolve(precomputed_dim(d));
    auto graphs = embed_for(d, cfg.dim, jobs);

    std::unique_ptr<std::ofstream> log_file;
    std::ostream* log = &out;
    if (!log_path.empty()) {
      log_file = std::make_unique<std::ofstream>(log_path);
      if (!*log_file) throw IoError("cannot write '" + log_path + "'");
      log = log_file.get();
    }
    *log << "epoch,mean_loss\n";
    TrainOptions opts;
    opts.on_epoch = [&](std::size_t epoch, double loss) {
      *log << epoch << "," << fmt_double(loss) << "\n" << std::flush;
    };
    TrainedModel m = train(graphs, cfg, opts);
    save_checkpoint(output, m.config, m.params);
    if (log != &out) out << "wrote checkpoint " << output << "\n";
    return kExitOk;
  }
};

// ---- evaluate ----

struct EvaluateCmd {
  ModelFlags model;
  std::string dataset, checkpoint, output, mfr_mode = "first";
  std::vector<std::string> train_sets;
  std::size_t cv = 0;
  bool chronological = false, classification = false, sweep = false;
  int jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("-d,--dataset", dataset, "Dataset to evaluate on")->required();
    app->add_option("-m,--model", checkpoint, "Checkpoint to evaluate");
    app->add_option("--cv", cv, "Run k-fold cross-validation instead of a fixed checkpoint");
    app->add_flag("--chronological", chronological, "Timestamp-ordered folds");
    app->add_option("--train", train_sets,
                    "Cross-project mode: train on these datasets, test on --dataset");
    app->add_flag("--mode-sweep", sweep, "With --cv: run every network mode");
    app->add_flag("--classification", classification, "Add top-k precision/recall/F1");
    app->add_option("--mfr", mfr_mode, "first | all")->capture_default_str();
    app->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    app->add_option("-o,--output", output, "Write the JSON report here");
    model.attach(app);
  }

  void emit(std::ostream& out, const std::string& json_text,
            const std::vector<std::pair<std::string, EvalReport>>& rows) const {
    if (output.empty()) {
      out << json_text;
    } else {
      write_file(output, json_text);
    }
    out << render_table(rows);
  }

  int run(std::ostream& out) {
    EvalOptions eval;
    eval.classification = classification;
    if (mfr_mode == "first") {
      eval.mfr_mode = MfrMode::First;
    } else if (mfr_mode == "all") {
      eval.mfr_mode = MfrMode::All;
    } else {
      throw ConfigError("unknown --mfr '" + mfr_mode + "'");
    }

    Dataset d = load_dataset(dataset);
    const std::size_t pre = precomputed_dim(d);

    if (cv > 0) {
      ModelConfig cfg = model.resolve(pre);
      auto graphs = embed_for(d, cfg.dim, jobs);
      CvOptions opts{cv, cfg.seed, chronological, jobs, eval};
      std::vector<ModeReport> reports;
      if (sweep) {
        reports = mode_sweep(d, graphs, cfg, opts);
      } else {
        reports.push_back({cfg.mode, cross_validate(d, graphs, cfg, opts)});
      }
      std::vector<std::pair<std::string, EvalReport>> rows;
      std::string json_text;
      for (const auto& mr : reports) {
        const std::string tag(to_string(mr.mode));
        for (std::size_t f = 0; f < mr.report.per_fold.size(); ++f)
          rows.emplace_back(tag + " fold " + std::to_string(f + 1), mr.report.per_fold[f]);
        rows.emplace_back(tag + " mean", mr.report.mean);
        json_text += cv_report_to_json(mr.report);
      }
      emit(out, json_text, rows);
      return kExitOk;
    }

    if (!train_sets.empty()) {
      ModelConfig cfg = model.resolve(pre);
      std::vector<std::vector<EmbeddedGraph>> projects;
      for (const auto& path : train_sets) {
        Dataset td = load_dataset(path);
        const std::size_t tpre = precomputed_dim(td);
        if (tpre != pre) {
          throw ValidationError("training dataset '" + path + "' has embedding dim " +
                                std::to_string(tpre) + " but the test dataset has " +
                                std::to_string(pre));
        }
        projects.push_back(embed_for(td, cfg.dim, jobs));
      }
      auto test = embed_for(d, cfg.dim, jobs);
      EvalReport r = cross_project(projects, test, cfg, eval, jobs);
      emit(out, report_to_json(r), {{"cross-project", r}});
      return kExitOk;
    }

    if (checkpoint.empty()) throw ConfigError("evaluate needs -m/--model, --cv or --train");
    Checkpoint ck = load_checkpoint(checkpoint);
    if (pre != 0 && pre != ck.config.dim) {
      throw ValidationError("dataset embedding dim " + std::to_string(pre) +
                            " does not match checkpoint dim " + std::to_string(ck.config.dim));
    }
    TrainedModel m{std::move(ck.params), ck.config, {}};
    auto graphs = embed_for(d, m.config.dim, jobs);
    EvalReport r = evaluate_model(m, graphs, eval, jobs);
    emit(out, report_to_json(r), {{"model", r}});
    return kExitOk;
  }
};

// ---- rank ----

struct RankCmd {
  std::string dataset, checkpoint, output;
  bool show_truth = false;
  int jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("-d,--dataset", dataset, "Dataset to rank (labels optional)")->required();
    app->add_option("-m,--model", checkpoint, "Checkpoint")->required();
    app->add_flag("--show-truth", show_truth, "Append the root-cause label column");
    app->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
    app->add_option("-o,--output", output, "Write the CSV here instead of stdout");
  }

  int run(std::ostream& out, std::ostream& err) const {
    ValidationOptions inference;
    inference.require_root_cause = false;
    inference.require_deleted = false;
    Dataset d = load_dataset(dataset, inference);
    Checkpoint ck = load_checkpoint(checkpoint);
    const std::size_t pre = precomputed_dim(d);
    if (pre != 0 && pre != ck.config.dim) {
      throw ValidationError("dataset embedding dim " + std::to_string(pre) +
                            " does not match checkpoint dim " + std::to_string(ck.config.dim));
    }
    TrainedModel m{std::move(ck.params), ck.config, {}};
    auto graphs = embed_for(d, m.config.dim, jobs);
    auto ranked = rank_all(m, graphs, jobs);

    std::ostringstream csv;
    std::size_t count = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const CommitGraph& g = graphs[i].graph;
      if (g.num_deleted() == 0) {
        err << "warning: commit '" << g.commit_id << "' has no deleted lines; skipped\n";
        continue;
      }
      ++count;
      csv << "# commit " << g.commit_id << "\n";
      csv << "rank,node_id,score,text" << (show_truth ? ",root_cause" : "") << "\n";
      for (std::size_t r = 0; r < ranked[i].size(); ++r) {
        const LineNode& node = g.nodes[ranked[i][r].node];
        csv << (r + 1) << "," << node.id << "," << fmt_double(ranked[i][r].score) << ","
            << csv_field(node.text.value_or(""));
        if (show_truth) csv << "," << (node.is_root_cause ? 1 : 0);
        csv << "\n";
      }
    }
    if (output.empty()) {
      out << csv.str();
    } else {
      write_file(output, csv.str());
    }
    err << count << " commits ranked\n";
    return kExitOk;
  }
};

// ---- gradcheck ----

struct GradcheckCmd {
  ModelConfig cfg;
  std::string mode = "full";
  std::size_t nodes = 4;
  double tolerance = 1e-5;
  double step = 1e-5;
  bool verbose = false;

  GradcheckCmd() {
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.d_out = 4;
  }

  void attach(CLI::App* app) {
    app->add_option("--dim", cfg.dim, "Embedding dimension")->capture_default_str();
    app->add_option("--heads", cfg.heads, "Attention heads")->capture_default_str();
    app->add_option("--layers", cfg.layers, "Layers")->capture_default_str();
    app->add_option("--d-out", cfg.d_out, "Task projection width")->capture_default_str();
    app->add_option("--mode", mode, "full | aggregation-only | retention-only")->capture_default_str();
    app->add_option("--nodes", nodes, "Nodes in the check graph (>= 4)")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
    app->add_option("--tolerance", tolerance, "Pass threshold on max relative error")->capture_default_str();
    app->add_option("--step-size", step, "Central-difference step")->capture_default_str();
    app->add_flag("-v,--verbose", verbose, "Print the error of every tensor");
  }

  int run(std::ostream& out) {
    auto m = parse_mode(mode);
    if (!m) throw ConfigError("unknown mode '" + mode + "'");
    cfg.mode = *m;
    validate_config(cfg);
    GradCheckResult r = network_grad_check(cfg, nodes, cfg.seed, step);
    if (verbose) {
      for (const auto& t : r.per_tensor) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-40s %.3e\n", t.name.c_str(), t.max_rel_error);
        out << buf;
      }
    }
    const bool pass = r.max_rel_error < tolerance;
    char buf[96];
    std::snprintf(buf, sizeof buf, "tensors=%zu max_rel_err=%.3e %s\n", r.per_tensor.size(),
                  r.max_rel_error, pass ? "PASS" : "FAIL");
    out << buf;
    return pass ? kExitOk : kExitFailure;
  }
};

}  // namespace

std::vector<std::string> overlay_config(const std::vector<std::string>& args,
                                        const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open config file '" + config_path + "'");
  std::vector<std::string> out = args;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(config_path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (!has_flag(args, flag)) out.push_back(flag + "=" + value);
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Root-cause line ranking for bug-fixing commits", "rcd"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  GenerateCmd generate_cmd;
  TrainCmd train_cmd;
  EvaluateCmd evaluate_cmd;
  RankCmd rank_cmd;
  GradcheckCmd gradcheck_cmd;
  std::string config_path;

  auto* gen = app.add_subcommand("generate", "Write a synthetic labelled dataset");
  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint");
  auto* evl = app.add_subcommand("evaluate", "Recall@N / MFR report for a model or a CV run");
  auto* rnk = app.add_subcommand("rank", "Rank the deleted lines of every commit");
  auto* gck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  generate_cmd.attach(gen);
  train_cmd.attach(trn);
  evaluate_cmd.attach(evl);
  rank_cmd.attach(rnk);
  gradcheck_cmd.attach(gck);
  for (auto* sub : {gen, trn, evl, rnk, gck})
    sub->add_option("--config", config_path, "Flat key=value file; flags take precedence");

  try {
    std::vector<std::string> args = raw_args;
    if (const std::string path = find_config_path(args); !path.empty()) {
      args = overlay_config(args, path);
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return generate_cmd.run(out);
    if (trn->parsed()) return train_cmd.run(out);
    if (evl->parsed()) return evaluate_cmd.run(out);
    if (rnk->parsed()) return rank_cmd.run(out, err);
    if (gck->parsed()) return gradcheck_cmd.run(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rcd::cli
