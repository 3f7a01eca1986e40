#include "dcmn/params.hpp"

#include <fstream>

#include "dcmn/binary_io.hpp"

namespace dcmn {

Tensor& ParamStore::add(const std::string& name, Shape shape, Init init, std::mt19937_64& rng,
                        double bound) {
  Tensor t(std::move(shape));
  if (init == Init::uniform) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) v = dist(rng);
  }
  return add(name, std::move(t));
}

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name " + name);
  value.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(value)});
  return entries_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return entries_[it->second].value;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void ParamStore::round(Precision p) {
  for (auto& e : entries_)
    for (double& v : e.value.data()) v = round_to(p, v);
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write("DCMN", 4);
  io::write_u32(out, kCheckpointVersion);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.at(i);
    io::write_bytes(out, params.name(i));
    io::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) io::write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) io::write_f32(out, v);
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

ParamStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  io::expect_magic(in, "DCMN");
  const auto version = io::read_u32(in, "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  ParamStore store;
  while (in.peek() != std::char_traits<char>::eof()) {
    std::string name = io::read_bytes(in, "parameter name", 4096);
    const auto rank = io::read_u32(in, "rank");
    if (rank == 0 || rank > 2) throw FormatError("parameter " + name + " has invalid rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(io::read_u32(in, "dimension"));
    Tensor t(shape);
    for (double& v : t.data()) v = io::read_f32(in);
    store.add(name, std::move(t));
  }
  return store;
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  ParamStore stored = read_checkpoint(path);
  if (stored.size() != params.size())
    throw FormatError("checkpoint has " + std::to_string(stored.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const std::string& name = stored.name(i);
    if (!params.contains(name)) throw FormatError("checkpoint parameter " + name + " not in model");
    Tensor& dst = params.get(name);
    const Tensor& src = stored.at(i);
    if (dst.shape() != src.shape())
      throw FormatError("parameter " + name + ": checkpoint shape " + to_string(src.shape()) +
                        " vs model " + to_string(dst.shape()));
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
}

}  // namespace dcmn
