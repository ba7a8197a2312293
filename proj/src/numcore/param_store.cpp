#include "cfil/numcore/param_store.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "cfil/numcore/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace cfil::numcore {

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw ArgumentError("ParamStore::add: duplicate parameter name '" + name + "'");
  index_[name] = names_.size();
  names_.push_back(name);
  tensors_.emplace_back(rows, cols);
  return tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("ParamStore::at: unknown parameter '" + name + "'");
  return tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("ParamStore::at: unknown parameter '" + name + "'");
  return tensors_[it->second];
}

size_t ParamStore::flat_size() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& t : tensors_) out.insert(out.end(), t.flat().begin(), t.flat().end());
  return out;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != flat_size()) throw DimensionError("ParamStore::unflatten: size mismatch");
  size_t off = 0;
  for (auto& t : tensors_) {
    std::memcpy(t.data(), flat.data() + off, t.size() * sizeof(double));
    off += t.size();
  }
}

void ParamStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StateError("ParamStore::save: cannot open '" + path + "'");
  f << "cfil-params v1\n" << names_.size() << "\n";
  for (size_t i = 0; i < names_.size(); ++i)
    f << names_[i] << " " << tensors_[i].rows() << " " << tensors_[i].cols() << "\n";
  f << "data\n";
  for (const auto& t : tensors_)
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StateError("ParamStore::load: cannot open '" + path + "'");
  std::string magic, version;
  f >> magic >> version;
  if (magic != "cfil-params" || version != "v1") throw StateError("ParamStore::load: bad header in '" + path + "'");
  size_t n = 0;
  f >> n;
  ParamStore store;
  for (size_t i = 0; i < n; ++i) {
    std::string name;
    int rows = 0, cols = 0;
    f >> name >> rows >> cols;
    store.add(name, rows, cols);
  }
  std::string marker;
  f >> marker;
  if (marker != "data") throw StateError("ParamStore::load: missing data marker");
  f.get();  // newline after marker
  for (auto& t : store.tensors_) {
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw StateError("ParamStore::load: truncated data section");
  }
  return store;
}

GradMap::GradMap(const ParamStore& store) {
  names_ = store.names();
  tensors_.reserve(names_.size());
  for (size_t i = 0; i < names_.size(); ++i) {
    index_[names_[i]] = i;
    tensors_.emplace_back(store.tensor(i).rows(), store.tensor(i).cols());
  }
}

Tensor& GradMap::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("GradMap::at: unknown parameter '" + name + "'");
  return tensors_[it->second];
}

const Tensor& GradMap::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("GradMap::at: unknown parameter '" + name + "'");
  return tensors_[it->second];
}

bool GradMap::all_finite() const {
  for (const auto& t : tensors_)
    if (!t.all_finite()) return false;
  return true;
}

}  // namespace cfil::numcore
