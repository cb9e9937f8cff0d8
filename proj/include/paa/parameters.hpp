#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "paa/matrix.hpp"
#include "paa/tensor.hpp"

namespace paa {

// Selects parameters the optimizer must leave untouched, by name prefix.
struct FreezeMask {
  std::vector<std::string> prefixes;

  bool frozen(std::string_view name) const {
    for (const auto& p : prefixes)
      if (name.substr(0, p.size()) == p) return true;
    return false;
  }
};

// Named parameters in name order.
using ParameterSet = std::map<std::string, Matrix>;
using BoundParameters = std::map<std::string, Tensor>;

// Places every parameter on the tape as a leaf; frozen ones do not take
// gradients.
BoundParameters bind_parameters(Tape& tape, const ParameterSet& params, const FreezeMask& mask);

const Tensor& lookup(const BoundParameters& bound, const std::string& name);

// Checkpoint container: the producing config (verbatim text plus its hash)
// followed by every parameter as name, shape and row-major values printed
// with 17 significant digits, so a save/load cycle is bit-exact.
//
//   paa-checkpoint v1
//   config_hash <16 hex digits>
//   config_lines <k>
//   <k config lines>
//   params <count>
//   param <name> <rows> <cols>
//   <rows lines of cols values>
//   end
struct Checkpoint {
  std::string config_text;
  std::uint64_t config_hash = 0;
  ParameterSet params;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
// Throws ConfigError when `expected_hash` is given and differs from the
// stored hash.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(std::istream& in, std::uint64_t expected_hash);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Hash of the serialized checkpoint bytes.
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

}  // namespace paa
