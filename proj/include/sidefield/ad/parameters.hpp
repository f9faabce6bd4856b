#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidefield/core/rng.hpp"
#include "sidefield/core/types.hpp"

namespace sidefield::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
};

/// Named trainable tensors in insertion order. Addresses are stable.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, int rows, int cols);
  /// Normal(0, stddev) initialisation.
  Parameter& add_normal(const std::string& name, int rows, int cols, double stddev, Rng& rng);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  /// One update from the accumulated gradients. Throws NumericalError if a
  /// gradient or updated value is non-finite.
  void step(ParameterStore& store);
  long long steps() const { return step_; }

 private:
  AdamConfig config_;
  long long step_ = 0;
};

/// Checkpoint layout: <stem>.bin holds every tensor as row-major little-endian
/// doubles back to back; <stem>.json lists name, shape, dtype, offset and
/// nbytes per tensor plus a free-form config object.
void save_checkpoint(const std::filesystem::path& stem, const ParameterStore& store, const nlohmann::json& config);

/// Overwrites values of the store's tensors from a checkpoint. Every tensor in
/// the store must be present with a matching shape.
nlohmann::json load_checkpoint(const std::filesystem::path& stem, ParameterStore& store);

/// Reads only the config object of a checkpoint manifest.
nlohmann::json read_checkpoint_config(const std::filesystem::path& stem);

}  // namespace sidefield::ad
