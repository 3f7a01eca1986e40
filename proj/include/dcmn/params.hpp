#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dcmn/tensor.hpp"

namespace dcmn {

/// Malformed or incompatible file.
class FormatError : public Error {
 public:
  using Error::Error;
};

enum class Init { uniform, zeros };

/// Ordered collection of named, trainable tensors.
///
/// Insertion order is stable and defines checkpoint record order and the
/// order in which the initializer consumes random numbers.
class ParamStore {
 public:
  /// Adds a parameter; `uniform` draws from [-bound, bound].
  Tensor& add(const std::string& name, Shape shape, Init init, std::mt19937_64& rng,
              double bound);
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  Tensor& at(std::size_t i) { return entries_[i].value; }
  const Tensor& at(std::size_t i) const { return entries_[i].value; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  void zero_grad();
  /// Rounds every value to the given storage precision.
  void round(Precision p);

 private:
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Binary checkpoint: "DCMN", u32 version, then one record per parameter
/// (u32 name length, name bytes, u32 rank, u32 dims, f32 values), all
/// little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
/// Overwrites the values of `params` from the file. Every stored record must
/// match a parameter of identical shape and every parameter must be present.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params);
/// Reads a checkpoint into a fresh store, in file order.
ParamStore read_checkpoint(const std::filesystem::path& path);

}  // namespace dcmn
