#include "sidefield/ad/parameters.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "sidefield/core/error.hpp"
#include "sidefield/core/io.hpp"

namespace sidefield::ad {

Parameter& ParameterStore::add(const std::string& name, int rows, int cols) {
  if (contains(name)) throw ContractViolation("duplicate parameter " + name);
  if (rows <= 0 || cols <= 0) throw ContractViolation("parameter " + name + " must have positive shape");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  p->adam_m = Matrix::Zero(rows, cols);
  p->adam_v = Matrix::Zero(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::add_normal(const std::string& name, int rows, int cols, double stddev, Rng& rng) {
  Parameter& p = add(name, rows, cols);
  // Row-major fill so the draw order matches the checkpoint layout.
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) p.value(r, c) = stddev * rng.normal();
  return p;
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

void Adam::step(ParameterStore& store) {
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (Parameter* p : store.all()) {
    if (p->grad.size() == 0) continue;
    if (!p->grad.allFinite()) throw NumericalError("non-finite gradient for " + p->name);
    p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * p->grad;
    p->adam_v = config_.beta2 * p->adam_v + (1.0 - config_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= config_.learning_rate * (p->adam_m.array() / c1) /
                        ((p->adam_v.array() / c2).sqrt() + config_.epsilon);
    if (!p->value.allFinite()) throw NumericalError("non-finite value after update of " + p->name);
  }
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const ParameterStore& store, const nlohmann::json& config) {
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter* p : store.all()) {
    const std::size_t offset = blob.size();
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double v = p->value(r, c);
        char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        blob.append(bytes, sizeof(double));
      }
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"dtype", "float64"},
                       {"offset", offset},
                       {"nbytes", blob.size() - offset}});
  }
  nlohmann::json manifest = {{"format", "sidefield-checkpoint-1"},
                             {"blob", with_suffix(stem, ".bin").filename().string()},
                             {"tensors", tensors},
                             {"config", config}};
  io::write_file_atomic(with_suffix(stem, ".bin"), blob);
  io::write_file_atomic(with_suffix(stem, ".json"), manifest.dump(2) + "\n");
}

nlohmann::json read_checkpoint_config(const std::filesystem::path& stem) {
  try {
    return nlohmann::json::parse(io::read_file(with_suffix(stem, ".json"))).at("config");
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("checkpoint manifest " + with_suffix(stem, ".json").string() + ": " + e.what());
  }
}

nlohmann::json load_checkpoint(const std::filesystem::path& stem, ParameterStore& store) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(with_suffix(stem, ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("checkpoint manifest " + with_suffix(stem, ".json").string() + ": " + e.what());
  }
  const std::string blob = io::read_file(with_suffix(stem, ".bin"));
  std::map<std::string, nlohmann::json> entries;
  for (const auto& t : manifest.at("tensors")) entries[t.at("name").get<std::string>()] = t;
  for (Parameter* p : store.all()) {
    auto it = entries.find(p->name);
    if (it == entries.end()) throw ContractViolation("checkpoint is missing tensor " + p->name);
    const auto& t = it->second;
    const auto shape = t.at("shape").get<std::vector<long long>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols())
      throw ContractViolation("checkpoint tensor " + p->name + " has a mismatched shape");
    if (t.at("dtype") != "float64") throw ContractViolation("checkpoint tensor " + p->name + " is not float64");
    const std::size_t offset = t.at("offset").get<std::size_t>();
    const std::size_t nbytes = t.at("nbytes").get<std::size_t>();
    if (nbytes != static_cast<std::size_t>(p->value.size()) * sizeof(double) || offset + nbytes > blob.size())
      throw ContractViolation("checkpoint tensor " + p->name + " has an invalid byte range");
    std::size_t pos = offset;
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double v;
        std::memcpy(&v, blob.data() + pos, sizeof(double));
        p->value(r, c) = v;
        pos += sizeof(double);
      }
  }
  return manifest.at("config");
}

}  // namespace sidefield::ad
