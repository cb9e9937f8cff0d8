#include "paa/parameters.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "paa/errors.hpp"
#include "paa/hash.hpp"

namespace paa {

BoundParameters bind_parameters(Tape& tape, const ParameterSet& params, const FreezeMask& mask) {
  BoundParameters bound;
  for (const auto& [name, m] : params) bound.emplace(name, tape.leaf(m, !mask.frozen(name)));
  return bound;
}

const Tensor& lookup(const BoundParameters& bound, const std::string& name) {
  const auto it = bound.find(name);
  if (it == bound.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(std::string("checkpoint truncated before ") + what);
  return line;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::vector<std::string> config_lines;
  std::istringstream cfg(ckpt.config_text);
  for (std::string line; std::getline(cfg, line);) config_lines.push_back(line);
  out << "paa-checkpoint v1\n";
  out << "config_hash " << to_hex(ckpt.config_hash) << '\n';
  out << "config_lines " << config_lines.size() << '\n';
  for (const auto& l : config_lines) out << l << '\n';
  out << "params " << ckpt.params.size() << '\n';
  for (const auto& [name, m] : ckpt.params) {
    out << "param " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ckpt;
  if (expect_line(in, "header") != "paa-checkpoint v1") throw IoError("not a paa checkpoint");
  {
    std::istringstream s(expect_line(in, "config hash"));
    std::string key, hex;
    if (!(s >> key >> hex) || key != "config_hash") throw IoError("checkpoint lacks config_hash");
    ckpt.config_hash = std::stoull(hex, nullptr, 16);
  }
  std::size_t lines = 0;
  {
    std::istringstream s(expect_line(in, "config"));
    std::string key;
    if (!(s >> key >> lines) || key != "config_lines") throw IoError("checkpoint lacks config_lines");
  }
  for (std::size_t i = 0; i < lines; ++i) ckpt.config_text += expect_line(in, "config text") + "\n";
  std::size_t count = 0;
  {
    std::istringstream s(expect_line(in, "params"));
    std::string key;
    if (!(s >> key >> count) || key != "params") throw IoError("checkpoint lacks params count");
  }
  for (std::size_t p = 0; p < count; ++p) {
    std::istringstream s(expect_line(in, "param header"));
    std::string key, name;
    std::size_t rows = 0, cols = 0;
    if (!(s >> key >> name >> rows >> cols) || key != "param") throw IoError("bad param header");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      std::istringstream row(expect_line(in, "param values"));
      for (std::size_t c = 0; c < cols; ++c) {
        std::string tok;
        if (!(row >> tok)) throw IoError("param '" + name + "' has a short row");
        m(r, c) = std::stod(tok);
      }
    }
    ckpt.params.emplace(name, std::move(m));
  }
  if (expect_line(in, "end") != "end") throw IoError("checkpoint missing end marker");
  return ckpt;
}

Checkpoint read_checkpoint(std::istream& in, std::uint64_t expected_hash) {
  Checkpoint ckpt = read_checkpoint(in);
  if (ckpt.config_hash != expected_hash) {
    throw ConfigError("checkpoint config hash " + to_hex(ckpt.config_hash) +
                      " does not match expected " + to_hex(expected_hash));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  return read_checkpoint(in);
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
  std::ostringstream s;
  write_checkpoint(s, ckpt);
  return fnv1a64(s.str());
}

}  // namespace paa
