#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "hypercaps/baselines.hpp"
#include "hypercaps/importer.hpp"
#include "hypercaps/model_check.hpp"
#include "hypercaps/training.hpp"

namespace hypercaps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifestFormat = "hypercaps-run-manifest";
constexpr int kManifestVersion = 1;

// Bad flag values detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string metrics_header() { return "precision\trecall\tf1\ttp\tfp\tfn\ttn"; }

std::string metrics_row(const training::Metrics& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << m.precision << '\t' << m.recall << '\t' << m.f1 << '\t' << m.counts.tp
     << '\t' << m.counts.fp << '\t' << m.counts.fn << '\t' << m.counts.tn;
  return os.str();
}

attention::AttentionConfig parse_attention_flag(const std::string& text) {
  if (text.find(',') == std::string::npos) return attention::named_variant(text);
  return attention::parse_attention(text);
}

// X1<TAB>X2 with an optional third label field; blank and # lines skipped.
std::vector<corpus::EntityPair> read_prediction_input(std::istream& in) {
  std::vector<corpus::EntityPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw corpus::CorpusError("input line " + std::to_string(line_no) + ": expected X1<TAB>X2");
    }
    corpus::EntityPair p;
    p.hypernym = line.substr(0, tab);
    const auto rest = line.substr(tab + 1);
    p.hyponym = rest.substr(0, rest.find('\t'));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

struct CorpusFile {
  std::string role;
  fs::path path;
  std::vector<corpus::EntityPair> pairs;
  std::string digest;
};

CorpusFile load_corpus_file(std::string role, const fs::path& path) {
  CorpusFile f;
  f.role = std::move(role);
  f.path = fs::absolute(path).lexically_normal();
  f.pairs = corpus::load_corpus(f.path);
  f.digest = sha256_file(f.path);
  return f;
}

// Everything a training run depends on.
struct TrainJob {
  training::TrainConfig config;
  fs::path train, validation, test;
};

json corpus_entry(const CorpusFile& f) {
  return json{{"path", f.path.string()}, {"sha256", f.digest}, {"pairs", f.pairs.size()}};
}

int execute_training(TrainJob job, const fs::path& out_dir, bool quiet, std::ostream& out, std::ostream& err,
                     const json* expected_corpus = nullptr) {
  std::vector<CorpusFile> files;
  files.push_back(load_corpus_file("train", job.train));
  if (!job.validation.empty()) files.push_back(load_corpus_file("validation", job.validation));
  if (!job.test.empty()) files.push_back(load_corpus_file("test", job.test));

  if (expected_corpus) {
    for (const auto& f : files) {
      const auto want = expected_corpus->at(f.role).at("sha256").get<std::string>();
      if (want != f.digest) {
        throw std::runtime_error(f.role + " corpus " + f.path.string() + " has digest " + f.digest +
                                 ", manifest records " + want);
      }
    }
  }
  const auto& train_pairs = files[0].pairs;
  const std::vector<corpus::EntityPair> no_pairs;
  const auto* validation_pairs = &no_pairs;
  const std::vector<corpus::EntityPair>* test_pairs = nullptr;
  for (const auto& f : files) {
    if (f.role == "validation") validation_pairs = &f.pairs;
    if (f.role == "test") test_pairs = &f.pairs;
  }
  if (train_pairs.empty()) throw corpus::CorpusError("training corpus " + files[0].path.string() + " is empty");

  job.config.model.vocab_size = corpus::Vocabulary::build(train_pairs, job.config.mode).size();

  fs::create_directories(out_dir);
  const auto checkpoint_path = out_dir / "model.ckpt";
  const auto log_path = out_dir / "epochs.tsv";
  const auto manifest_path = out_dir / "manifest.json";

  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kManifestVersion;
  manifest["config"] = json::parse(training::config_to_json_text(job.config));
  manifest["seed"] = job.config.seed;
  manifest["corpus"] = json::object();
  for (const auto& f : files) manifest["corpus"][f.role] = corpus_entry(f);
  manifest["artifacts"] = {{"checkpoint", checkpoint_path.filename().string()},
                           {"epoch_log", log_path.filename().string()},
                           {"manifest", manifest_path.filename().string()}};
  {
    std::ofstream m(manifest_path, std::ios::binary | std::ios::trunc);
    m << manifest.dump(2) << '\n';
    if (!m) throw std::runtime_error("cannot write " + manifest_path.string());
  }

  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  log << training::epoch_log_header() << '\n' << std::flush;
  if (!quiet) {
    err << "training on " << train_pairs.size() << " pairs (" << validation_pairs->size() << " validation), vocabulary "
        << job.config.model.vocab_size << '\n';
  }

  const auto result = training::train(job.config, train_pairs, *validation_pairs, [&](const training::EpochLog& e) {
    log << training::format_epoch_log(e) << '\n' << std::flush;
    if (!quiet) err << training::format_epoch_log(e) << '\n';
  });
  training::save_checkpoint(checkpoint_path, result.best);

  if (result.status == training::TrainStatus::diverged) {
    err << "error: training diverged (" << result.diagnostic << "); kept the checkpoint from epoch "
        << result.best.best_epoch << " in " << checkpoint_path.string() << '\n';
    return kRuntimeError;
  }
  if (!quiet) {
    err << "best epoch " << result.best.best_epoch << " of " << result.log.size()
        << (result.status == training::TrainStatus::early_stopped ? " (early stop)" : "") << "; checkpoint "
        << checkpoint_path.string() << '\n';
  }

  out << "split\t" << metrics_header() << '\n';
  if (result.best.best_validation) {
    out << (validation_pairs->empty() ? "train" : "validation") << '\t' << metrics_row(*result.best.best_validation)
        << '\n';
  }
  if (test_pairs) out << "test\t" << metrics_row(training::evaluate(result.best, *test_pairs, job.config.workers)) << '\n';
  return kOk;
}

struct TrainFlags {
  std::string train, validation, test, out = "run";
  std::string mode = "word";
  std::uint64_t seed = 1;
  std::size_t batch_size = 128;
  std::string attn = "1,0";
  bool trainable_attention = false;
  int routing_iters = 2;
  std::size_t embed_dim = 256, hidden = 64, capsule_dim = 64;
  std::size_t patience = 5, max_epochs = 100;
  std::string precision = "float32";
  double rho = 0.95, epsilon = 1e-6;
  double m_plus = 0.9, m_minus = 0.1, absent_weight = 1.0;
  std::size_t workers = 0;
  bool quiet = false;

  training::TrainConfig to_config() const {
    training::TrainConfig c;
    try {
      c.mode = corpus::parse_token_mode(mode);
      c.precision = training::parse_precision(precision);
      c.model.attention = parse_attention_flag(attn);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    c.model.attention.trainable = trainable_attention;
    c.seed = seed;
    c.batch_size = batch_size;
    c.model.routing_iterations = routing_iters;
    c.model.embed_dim = embed_dim;
    c.model.hidden_dim = hidden;
    c.model.capsule_dim = capsule_dim;
    c.patience = patience;
    c.max_epochs = max_epochs;
    c.optimizer.rho = rho;
    c.optimizer.epsilon = epsilon;
    c.model.loss.m_plus = m_plus;
    c.model.loss.m_minus = m_minus;
    c.model.loss.absent_weight = absent_weight;
    c.workers = workers;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

// Fills options the command line left unset from a config file. CLI11 only
// reads config files for the top-level app, so subcommands do it here.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::FileError& e) {
    throw std::runtime_error(e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == cmd.get_name())) {
      throw UsageError(path + ": unexpected section [" + item.parents[0] + "]");
    }
    auto name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    auto* opt = cmd.get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config" || name == "help") {
      throw UsageError(path + ": unknown option '" + item.name + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError(path + ": " + item.name + ": " + e.what());
    }
  }
}

struct GradcheckFlags {
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  model::ModelCheckConfig model;
  double threshold = 1e-4;
};

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compound-entity hypernymy detection with a Bi-GRU capsule network"};
  app.name(args.empty() ? "hypercaps" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  // import
  std::string import_src, import_out;
  auto* import_cmd = app.add_subcommand("import", "Convert published pair files to canonical TSV plus stats.tsv");
  import_cmd->add_option("src", import_src, "Directory with the published files")->required();
  import_cmd->add_option("out", import_out, "Output directory")->required();

  // train
  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes model.ckpt, epochs.tsv, manifest.json");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "INI/TOML file of option=value lines (flags take precedence)");
  train_cmd->add_option("--train", tf.train, "Training TSV")->required();
  train_cmd->add_option("--val", tf.validation, "Validation TSV (model selection; training split if omitted)");
  train_cmd->add_option("--test", tf.test, "Test TSV scored with the selected checkpoint");
  train_cmd->add_option("--out", tf.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--mode", tf.mode, "word | character")->capture_default_str();
  train_cmd->add_option("--seed", tf.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--batch-size", tf.batch_size, "Pairs per update")->capture_default_str();
  train_cmd->add_option("--attn", tf.attn, "a,b[,softmax] or a variant name (difference, difference-x10, "
                                           "difference-softmax, equal)")
      ->capture_default_str();
  train_cmd->add_flag("--trainable-attention", tf.trainable_attention, "Learn a and b");
  train_cmd->add_option("--routing-iters", tf.routing_iters, "Dynamic routing iterations")->capture_default_str();
  train_cmd->add_option("--embed-dim", tf.embed_dim, "Embedding width")->capture_default_str();
  train_cmd->add_option("--hidden", tf.hidden, "GRU state width per direction")->capture_default_str();
  train_cmd->add_option("--capsule-dim", tf.capsule_dim, "Classification capsule width")->capture_default_str();
  train_cmd->add_option("--patience", tf.patience, "Epochs without F1 improvement before stopping")->capture_default_str();
  train_cmd->add_option("--max-epochs", tf.max_epochs, "Epoch limit")->capture_default_str();
  train_cmd->add_option("--precision", tf.precision, "float32 | float64")->capture_default_str();
  train_cmd->add_option("--adadelta-rho", tf.rho, "AdaDelta decay")->capture_default_str();
  train_cmd->add_option("--adadelta-eps", tf.epsilon, "AdaDelta epsilon")->capture_default_str();
  train_cmd->add_option("--m-plus", tf.m_plus, "Margin for the present class")->capture_default_str();
  train_cmd->add_option("--m-minus", tf.m_minus, "Margin for the absent class")->capture_default_str();
  train_cmd->add_option("--absent-weight", tf.absent_weight, "Weight of the absent-class loss term")->capture_default_str();
  train_cmd->add_option("--workers", tf.workers, "Worker threads (0: HYPERCAPS_WORKERS or all cores)");
  train_cmd->add_flag("--quiet", tf.quiet, "No progress on stderr");

  // replay
  std::string replay_manifest, replay_out;
  bool replay_quiet = false;
  std::size_t replay_workers = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run training from a manifest.json");
  replay_cmd->add_option("manifest", replay_manifest, "Run manifest")->required();
  replay_cmd->add_option("--out", replay_out, "Output directory")->required();
  replay_cmd->add_option("--workers", replay_workers, "Worker threads");
  replay_cmd->add_flag("--quiet", replay_quiet, "No progress on stderr");

  // eval
  std::string eval_ckpt, eval_data;
  std::size_t eval_workers = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Score a labelled TSV; prints P/R/F1 and confusion counts");
  eval_cmd->add_option("--checkpoint,checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data,data", eval_data, "Labelled TSV")->required();
  eval_cmd->add_option("--workers", eval_workers, "Worker threads");

  // predict
  std::string predict_ckpt, predict_data;
  std::size_t predict_workers = 0;
  auto* predict_cmd = app.add_subcommand("predict", "Label pairs; prints X1, X2, label, ||v1||, ||v2||");
  predict_cmd->add_option("--checkpoint,checkpoint", predict_ckpt, "Checkpoint file")->required();
  predict_cmd->add_option("--data,data", predict_data, "TSV of X1<TAB>X2[<TAB>label]; stdin when omitted");
  predict_cmd->add_option("--workers", predict_workers, "Worker threads");

  // baseline
  std::string baseline_method, baseline_data, baseline_mode = "word";
  auto* baseline_cmd = app.add_subcommand("baseline", "Score a containment baseline on a labelled TSV");
  baseline_cmd->add_option("--method,method", baseline_method, "string_containing | set_containing")->required();
  baseline_cmd->add_option("--data,data", baseline_data, "Labelled TSV")->required();
  baseline_cmd->add_option("--mode", baseline_mode, "word | character")->capture_default_str();

  // gradcheck
  GradcheckFlags gf;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model at 64-bit precision");
  gradcheck_cmd->add_option("--seeds", gf.seeds, "Number of random models")->capture_default_str();
  gradcheck_cmd->add_option("--seed", gf.first_seed, "First seed")->capture_default_str();
  gradcheck_cmd->add_option("--embed-dim", gf.model.embed_dim, "Embedding width")->capture_default_str();
  gradcheck_cmd->add_option("--hidden", gf.model.hidden_dim, "GRU width per direction")->capture_default_str();
  gradcheck_cmd->add_option("--capsule-dim", gf.model.capsule_dim, "Capsule width")->capture_default_str();
  gradcheck_cmd->add_option("--max-len", gf.model.max_length, "Longest entity including EOS")->capture_default_str();
  gradcheck_cmd->add_option("--routing-iters", gf.model.routing_iterations, "Routing iterations")->capture_default_str();
  gradcheck_cmd->add_flag("--softmax", gf.model.softmax_attention, "Softmax attention variant");
  gradcheck_cmd->add_option("--eps", gf.model.eps, "Central-difference step")->capture_default_str();
  gradcheck_cmd->add_option("--threshold", gf.threshold, "Largest accepted relative error")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return kUsageError;
  }

  auto* cmd = app.get_subcommands().front();
  try {
    if (cmd == import_cmd) {
      const auto report = importer::import_corpora(import_src, import_out);
      out << report.to_tsv();
      return kOk;
    }
    if (cmd == train_cmd) {
      if (!train_config.empty()) apply_config_file(*train_cmd, train_config);
      TrainJob job;
      job.config = tf.to_config();
      job.train = tf.train;
      job.validation = tf.validation;
      job.test = tf.test;
      return execute_training(std::move(job), tf.out, tf.quiet, out, err);
    }
    if (cmd == replay_cmd) {
      std::ifstream in(replay_manifest, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open manifest " + replay_manifest);
      const auto manifest = json::parse(in);
      if (manifest.value("format", "") != kManifestFormat || manifest.value("version", 0) != kManifestVersion) {
        throw std::runtime_error("manifest format " + manifest.value("format", std::string("?")) + " version " +
                                 std::to_string(manifest.value("version", 0)) + " is not supported (expected " +
                                 std::string(kManifestFormat) + " version " + std::to_string(kManifestVersion) + ")");
      }
      TrainJob job;
      job.config = training::config_from_json_text(manifest.at("config").dump());
      job.config.workers = replay_workers;
      const auto& corpus = manifest.at("corpus");
      job.train = corpus.at("train").at("path").get<std::string>();
      if (corpus.contains("validation")) job.validation = corpus.at("validation").at("path").get<std::string>();
      if (corpus.contains("test")) job.test = corpus.at("test").at("path").get<std::string>();
      return execute_training(std::move(job), replay_out, replay_quiet, out, err, &corpus);
    }
    if (cmd == eval_cmd) {
      const auto ckpt = training::load_checkpoint(eval_ckpt);
      const auto pairs = corpus::load_corpus(eval_data);
      out << metrics_header() << '\n' << metrics_row(training::evaluate(ckpt, pairs, eval_workers)) << '\n';
      return kOk;
    }
    if (cmd == predict_cmd) {
      const auto ckpt = training::load_checkpoint(predict_ckpt);
      std::vector<corpus::EntityPair> pairs;
      if (predict_data.empty()) {
        pairs = read_prediction_input(std::cin);
      } else {
        std::ifstream in(predict_data, std::ios::binary);
        if (!in) throw corpus::CorpusError("cannot open " + predict_data);
        pairs = read_prediction_input(in);
      }
      const auto predictions = training::predict(ckpt, pairs, predict_workers);
      out << std::fixed << std::setprecision(6);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = predictions[i];
        out << pairs[i].hypernym << '\t' << pairs[i].hyponym << '\t' << static_cast<int>(p.label) << '\t'
            << p.length_hypernymy << '\t' << p.length_none << '\n';
      }
      return kOk;
    }
    if (cmd == baseline_cmd) {
      baselines::Method method;
      corpus::TokenMode mode;
      try {
        method = baselines::parse_method(baseline_method);
        mode = corpus::parse_token_mode(baseline_mode);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto pairs = corpus::load_corpus(baseline_data);
      out << metrics_header() << '\n' << metrics_row(baselines::run_baseline(method, pairs, mode)) << '\n';
      return kOk;
    }
    if (cmd == gradcheck_cmd) {
      if (gf.seeds == 0) throw UsageError("--seeds must be at least 1");
      double worst = 0.0;
      out << "seed\tmax_rel_error\tworst_param\tcoordinates\n";
      for (std::size_t k = 0; k < gf.seeds; ++k) {
        model::ModelCheckResult r;
        try {
          r = model::model_grad_check(gf.model, gf.first_seed + k);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
        worst = std::max(worst, r.report.max_relative_error);
        out << r.seed << '\t' << std::scientific << std::setprecision(3) << r.report.max_relative_error
            << std::defaultfloat << '\t' << r.worst_param << '\t' << r.report.coordinates << '\n';
      }
      out << "max\t" << std::scientific << std::setprecision(3) << worst << std::defaultfloat << '\n';
      if (!(worst < gf.threshold)) {
        err << "error: gradient check failed: max relative error " << worst << " >= " << gf.threshold << '\n';
        return kRuntimeError;
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << cmd->help();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace hypercaps::cli
