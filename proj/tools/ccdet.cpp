// Command-line front end for the covert-channel laboratory: simulate traffic,
// featurize traces, train the classifier, score traces, and run the full
// evaluation protocol. Exit codes: 0 success, 1 runtime failure, 2 usage.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "ccdet/attack.hpp"
#include "ccdet/config.hpp"
#include "ccdet/distributed.hpp"
#include "ccdet/eval.hpp"
#include "ccdet/experiment.hpp"
#include "ccdet/rng.hpp"
#include "ccdet/signature.hpp"
#include "ccdet/svm.hpp"
#include "ccdet/text.hpp"
#include "ccdet/trace_io.hpp"

namespace fs = std::filesystem;
using namespace ccdet;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> sets;  // raw key=value overrides
  std::optional<std::uint64_t> seed;
};

// Precedence: direct flags > --set pairs > config file > defaults. The seed
// flag is applied last with the other direct flags.
RunConfig build_config(const CommonArgs& common) {
  RunConfig cfg;
  if (!common.config_path.empty()) cfg = load_config(common.config_path);
  for (const auto& pair : common.sets) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set", "expected key=value, got '" + pair + "'");
    try {
      apply_setting(cfg, std::string_view(pair).substr(0, eq),
                    std::string_view(pair).substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw CLI::ValidationError("--set", e.what());
    }
  }
  if (common.seed) cfg.master_seed = *common.seed;
  return cfg;
}

fs::path resolve_run_dir(const CommonArgs& common) {
  fs::path dir;
  if (!common.run_dir.empty()) {
    dir = common.run_dir;
  } else if (const char* env = std::getenv("CCDET_RUN_DIR"); env != nullptr && *env != '\0') {
    dir = env;
  } else {
    dir = "run";
  }
  fs::create_directories(dir);
  return dir;
}

sig::ReferenceDistribution load_reference(const RunConfig& cfg, const std::string& path) {
  const Trace ref_trace = read_trace(path);
  if (ref_trace.label != TraceLabel::overt)
    throw std::runtime_error("reference trace must be overt traffic: " + path);
  return reference_from_trace(ref_trace, cfg.reference_mode);
}

int run_simulate(const CommonArgs& common, const std::string& channel_name, std::size_t bits,
                 bool overt, double duration, const std::string& profile_name,
                 std::string out_path) {
  RunConfig cfg = build_config(common);
  const fs::path run_dir = resolve_run_dir(common);

  if (overt) {
    const auto profile = attack::workload_profile_from_string(profile_name);
    const auto seed = cfg.stage_seed("overt", cfg.channel.seed);
    const Trace trace = attack::generate_overt(duration, profile, seed);
    if (out_path.empty())
      out_path = (run_dir / ("trace-overt-" + profile_name + ".txt")).string();
    write_trace(trace, out_path);
    std::cout << "wrote " << trace.samples.size() << " overt samples (" << profile_name
              << ", " << format_double(duration) << " s) to " << out_path << "\n";
    return 0;
  }

  if (!channel_name.empty()) cfg.channel.kind = resource_kind_from_string(channel_name);
  cfg.channel.seed = cfg.stage_seed("channel", cfg.channel.seed);
  const auto payload = BitStream::random(bits, derive_seed(cfg.master_seed, "payload"));
  const Trace trace = attack::encode(payload, cfg.channel, cfg.rotation);
  if (out_path.empty())
    out_path = (run_dir / ("trace-covert-" + to_string(cfg.channel.kind) + ".txt")).string();
  write_trace(trace, out_path);

  const BitStream decoded = attack::decode(trace, cfg.channel, cfg.rotation);
  std::size_t errors = 0;
  const std::size_t n = std::min(decoded.size(), payload.size());
  for (std::size_t i = 0; i < n; ++i)
    if (decoded.bits[i] != payload.bits[i]) ++errors;
  errors += payload.size() - n;
  std::cout << "wrote " << trace.samples.size() << " covert samples ("
            << to_string(cfg.channel.kind) << " channel, " << payload.size() << " bits) to "
            << out_path << "\n";
  std::cout << "round-trip bit error rate: "
            << format_double(static_cast<double>(errors) / static_cast<double>(payload.size()))
            << " (" << errors << "/" << payload.size() << ")\n";
  return 0;
}

int run_featurize(const CommonArgs& common, const std::vector<std::string>& inputs,
                  const std::string& reference_path, std::size_t block_size,
                  std::string out_path) {
  RunConfig cfg = build_config(common);
  const fs::path run_dir = resolve_run_dir(common);
  if (block_size != 0) cfg.signature.block_size = block_size;

  const auto ref = load_reference(cfg, reference_path);
  std::vector<SignatureRecord> records;
  std::size_t blocks = 0;
  for (const auto& input : inputs) {
    const Trace trace = read_trace(input);
    auto trace_blocks = sig::build_signature(trace, ref, cfg.signature);
    blocks += trace_blocks.size();
    auto flat = sig::flatten(trace_blocks);
    records.insert(records.end(), flat.begin(), flat.end());
  }
  if (out_path.empty()) out_path = (run_dir / "signature.csv").string();
  sig::write_signature_csv(records, out_path);
  std::cout << "wrote " << records.size() << " records (" << blocks << " blocks of "
            << cfg.signature.block_size << ") to " << out_path << "\n";
  return 0;
}

int run_train(const CommonArgs& common, const std::string& data_path, std::size_t workers_flag,
              std::size_t balance_to, std::string out_path) {
  RunConfig cfg = build_config(common);
  const fs::path run_dir = resolve_run_dir(common);
  if (workers_flag != 0) cfg.workers = workers_flag;

  std::vector<SignatureRecord> records = sig::read_signature_csv(data_path);
  if (balance_to != 0)
    records = sig::balance(records, balance_to, cfg.stage_seed("signature", cfg.signature_seed));

  if (out_path.empty()) out_path = (run_dir / "model.txt").string();
  const auto svm_seed = cfg.stage_seed("svm", cfg.svm_seed);

  if (cfg.workers == 1) {
    const auto model = svm::train(records, cfg.svm, svm_seed);
    svm::save_model(model, out_path);
    std::cout << "trained on " << records.size() << " records: "
              << model.support_vectors.rows() << " support vectors, bias "
              << format_double(model.bias) << "\n";
    std::cout << "wrote model to " << out_path << "\n";
    return 0;
  }

  const auto dist_seed = cfg.stage_seed("distributed", cfg.distributed_seed);
  const auto parts = dist::partition(records, cfg.workers, dist_seed);
  const auto merged = dist::train_distributed(parts, cfg.svm, dist_seed);
  for (std::size_t w = 0; w < merged.worker_models.size(); ++w) {
    const auto worker_path = run_dir / ("model-worker-" + std::to_string(w + 1) + ".txt");
    svm::save_model(merged.worker_models[w], worker_path);
  }
  svm::save_model(merged.model, out_path);
  std::cout << "trained " << cfg.workers << " workers on " << records.size()
            << " records: " << merged.model.support_vectors.rows()
            << " merged support vectors, bias " << format_double(merged.model.bias) << "\n";
  std::cout << "wrote merged model to " << out_path << " and worker models to "
            << run_dir.string() << "\n";
  return 0;
}

int run_detect(const CommonArgs& common, const std::string& input_path,
               const std::string& model_path, const std::string& reference_path,
               std::size_t block_size) {
  RunConfig cfg = build_config(common);
  if (block_size != 0) cfg.signature.block_size = block_size;

  const auto model = svm::load_model(model_path);
  const auto ref = load_reference(cfg, reference_path);
  const Trace trace = read_trace(input_path);
  const auto blocks = sig::build_signature(trace, ref, cfg.signature);

  std::size_t covert_blocks = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto f = svm::decision_values(model, svm::feature_matrix(blocks[b].records));
    const auto votes = static_cast<std::size_t>((f.array() > 0.0).count());
    const bool covert = 2 * votes > blocks[b].records.size();
    covert_blocks += covert ? 1 : 0;
    std::cout << "block " << b << ": " << (covert ? "covert" : "overt") << " (" << votes << "/"
              << blocks[b].records.size() << " records covert)\n";
  }
  std::cout << "verdict: " << covert_blocks << "/" << blocks.size() << " blocks covert\n";
  return 0;
}

int run_evaluate(const CommonArgs& common, std::size_t workers_flag, double noise_flag) {
  RunConfig cfg = build_config(common);
  const fs::path run_dir = resolve_run_dir(common);
  if (workers_flag != 0) cfg.workers = workers_flag;
  if (noise_flag >= 0.0) cfg.eval.noise_fraction = noise_flag;

  const auto report = run_experiment(cfg);
  const auto txt = run_dir / "report.txt";
  const auto csv = run_dir / "report.csv";
  eval::write_report_txt(report, txt);
  eval::write_report_csv(report, csv);

  for (const auto& cell : report.cells)
    std::cout << to_string(cell.channel) << " @" << cell.block_size << ": sensitivity "
              << format_fixed(cell.cm.sensitivity(), 4) << ", specificity "
              << format_fixed(cell.cm.specificity(), 4) << ", noise delta "
              << format_fixed(cell.noise_delta_pct, 3) << " points\n";
  std::cout << "wrote " << txt.string() << " and " << csv.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covert timing channel laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  app.add_option("--config", common.config_path, "configuration file (key=value lines)");
  app.add_option("--run-dir", common.run_dir,
                 "artifact directory (default $CCDET_RUN_DIR, then ./run)");
  app.add_option("--set", common.sets, "override one config key, e.g. --set svm.gamma=0.5");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "master seed");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a covert or overt trace");
  std::string channel_name;
  std::size_t bits = 256;
  bool overt = false;
  double duration = 3600.0;
  std::string profile_name = "steady";
  std::string sim_out;
  sim->add_option("--channel", channel_name, "covert channel: cpu, cache or membus");
  sim->add_option("--bits", bits, "payload length in bits")->check(CLI::PositiveNumber);
  sim->add_flag("--overt", overt, "generate innocent traffic instead of a covert trace");
  sim->add_option("--duration", duration, "overt trace length in seconds");
  sim->add_option("--profile", profile_name, "overt workload: steady, bursty or diurnal");
  sim->add_option("--out", sim_out, "output trace path");

  // featurize
  auto* feat = app.add_subcommand("featurize", "turn traces into a signature dataset");
  std::vector<std::string> feat_inputs;
  std::string feat_reference;
  std::size_t feat_block = 0;
  std::string feat_out;
  feat->add_option("--input", feat_inputs, "trace file(s) to featurize")->required();
  feat->add_option("--reference", feat_reference, "overt reference trace")->required();
  feat->add_option("--block-size", feat_block, "records per detection block");
  feat->add_option("--out", feat_out, "output dataset path");

  // train
  auto* train = app.add_subcommand("train", "train the classifier on a signature dataset");
  std::string train_data;
  std::size_t train_workers = 0;
  std::size_t train_balance = 0;
  std::string train_out;
  train->add_option("--data", train_data, "signature dataset (alpha,beta,context,label)")
      ->required();
  train->add_option("--workers", train_workers, "worker count for the map/reduce trainer");
  train->add_option("--balance", train_balance,
                    "balance the dataset to this many records before training");
  train->add_option("--out", train_out, "merged model path");

  // detect
  auto* det = app.add_subcommand("detect", "score a trace block by block");
  std::string det_input, det_model, det_reference;
  std::size_t det_block = 0;
  det->add_option("--input", det_input, "trace to score")->required();
  det->add_option("--model", det_model, "trained model file")->required();
  det->add_option("--reference", det_reference, "overt reference trace")->required();
  det->add_option("--block-size", det_block, "records per detection block");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "run the full evaluation protocol");
  std::size_t eval_workers = 0;
  double eval_noise = -1.0;
  ev->add_option("--workers", eval_workers, "worker count for the map/reduce trainer");
  ev->add_option("--noise", eval_noise, "noise fraction for the robustness sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (seed_opt->count() > 0) common.seed = seed_flag;

  try {
    if (sim->parsed()) {
      if (overt && !channel_name.empty()) {
        std::cerr << "simulate: --overt and --channel are mutually exclusive\n";
        return 2;
      }
      return run_simulate(common, channel_name, bits, overt, duration, profile_name, sim_out);
    }
    if (feat->parsed())
      return run_featurize(common, feat_inputs, feat_reference, feat_block, feat_out);
    if (train->parsed())
      return run_train(common, train_data, train_workers, train_balance, train_out);
    if (det->parsed()) return run_detect(common, det_input, det_model, det_reference, det_block);
    if (ev->parsed()) return run_evaluate(common, eval_workers, eval_noise);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
