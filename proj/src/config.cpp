#include "ccdet/config.hpp"

#include <fstream>
#include <istream>

#include "ccdet/rng.hpp"
#include "ccdet/text.hpp"

namespace ccdet {

namespace {

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false, got '" + std::string(v) + "'");
}

std::vector<double> parse_double_list(std::string_view v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;  // empty list disables rotation
  for (auto part : split(v, ',')) out.push_back(parse_double(trim(part)));
  return out;
}

sig::ReferenceDistribution::Mode parse_reference_mode(std::string_view v) {
  if (v == "two_sample") return sig::ReferenceDistribution::Mode::two_sample_overt;
  if (v == "gaussian") return sig::ReferenceDistribution::Mode::fitted_gaussian;
  throw std::invalid_argument("expected two_sample or gaussian, got '" + std::string(v) + "'");
}

}  // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k(trim(key));
  const std::string v(trim(value));
  try {
    if (k == "seed") cfg.master_seed = parse_uint(v);

    else if (k == "channel.kind") cfg.channel.kind = resource_kind_from_string(v);
    else if (k == "channel.bit_interval") cfg.channel.bit_interval = parse_double(v);
    else if (k == "channel.value_high") cfg.channel.value_high = parse_double(v);
    else if (k == "channel.value_low") cfg.channel.value_low = parse_double(v);
    else if (k == "channel.base_latency") cfg.channel.base_latency = parse_double(v);
    else if (k == "channel.contended_latency") cfg.channel.contended_latency = parse_double(v);
    else if (k == "channel.jitter_std") cfg.channel.jitter_std = parse_double(v);
    else if (k == "channel.tick") cfg.channel.tick = parse_double(v);
    else if (k == "channel.resync_run_limit")
      cfg.channel.resync_run_limit = static_cast<std::size_t>(parse_uint(v));
    else if (k == "channel.seed") cfg.channel.seed = parse_uint(v);

    else if (k == "rotation.intervals") cfg.rotation.intervals = parse_double_list(v);
    else if (k == "rotation.dwell") cfg.rotation.dwell = parse_double(v);

    else if (k == "signature.block_size")
      cfg.signature.block_size = static_cast<std::size_t>(parse_uint(v));
    else if (k == "signature.binarize_ks") cfg.signature.binarize_ks = parse_bool(v);
    else if (k == "signature.significance") cfg.signature.significance = parse_double(v);
    else if (k == "signature.reference_mode") cfg.reference_mode = parse_reference_mode(v);
    else if (k == "signature.seed") cfg.signature_seed = parse_uint(v);

    else if (k == "svm.gamma") cfg.svm.gamma = parse_double(v);
    else if (k == "svm.box_constraint") cfg.svm.box_constraint = parse_double(v);
    else if (k == "svm.tolerance") cfg.svm.tolerance = parse_double(v);
    else if (k == "svm.max_passes") cfg.svm.max_passes = static_cast<std::size_t>(parse_uint(v));
    else if (k == "svm.seed") cfg.svm_seed = parse_uint(v);

    else if (k == "distributed.workers")
      cfg.workers = static_cast<std::size_t>(parse_uint(v));
    else if (k == "distributed.seed") cfg.distributed_seed = parse_uint(v);

    else if (k == "eval.ref_samples")
      cfg.eval.ref_samples = static_cast<std::size_t>(parse_uint(v));
    else if (k == "eval.train_samples")
      cfg.eval.train_samples = static_cast<std::size_t>(parse_uint(v));
    else if (k == "eval.test_samples")
      cfg.eval.test_samples = static_cast<std::size_t>(parse_uint(v));
    else if (k == "eval.train_size")
      cfg.eval.train_size = static_cast<std::size_t>(parse_uint(v));
    else if (k == "eval.noise_fraction") cfg.eval.noise_fraction = parse_double(v);
    else if (k == "eval.noise_seeds")
      cfg.eval.noise_seeds = static_cast<std::size_t>(parse_uint(v));
    else if (k == "eval.noise_target") cfg.eval.noise_target = eval::noise_target_from_string(v);
    else if (k == "eval.noise_basis") cfg.eval.noise_basis = eval::noise_basis_from_string(v);
    else if (k == "eval.record_level") cfg.eval.record_level = parse_bool(v);
    else if (k == "eval.seed") cfg.eval.seed = parse_uint(v);

    else
      throw std::invalid_argument("unknown config key '" + k + "'");
  } catch (const std::invalid_argument& e) {
    // Re-throw with the field path in front unless it is already there.
    const std::string what = e.what();
    if (what.find(k) == std::string::npos)
      throw std::invalid_argument(k + ": " + what);
    throw;
  }
}

void RunConfig::validate() const {
  try {
    channel.validate();
    rotation.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("channel config: ") + e.what());
  }
  if (signature.block_size < 5)
    throw std::invalid_argument("signature.block_size must be at least 5");
  if (!(signature.significance > 0.0 && signature.significance < 1.0))
    throw std::invalid_argument("signature.significance must lie in (0, 1)");
  try {
    svm.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("svm config: ") + e.what());
  }
  if (workers < 1) throw std::invalid_argument("distributed.workers must be >= 1");
  if (workers > eval.train_size / 2)
    throw std::invalid_argument("distributed.workers must not exceed eval.train_size/2");
  try {
    eval.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("eval config: ") + e.what());
  }
}

std::uint64_t RunConfig::stage_seed(std::string_view stage, std::uint64_t explicit_seed) const {
  return explicit_seed != 0 ? explicit_seed : derive_seed(master_seed, stage);
}

RunConfig load_config(std::istream& in, const std::string& name) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw std::runtime_error(name + ":" + std::to_string(line_no) +
                               ": expected 'key=value', got '" + std::string(body) + "'");
    try {
      apply_setting(cfg, body.substr(0, eq), body.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  return load_config(in, path.string());
}

}  // namespace ccdet
