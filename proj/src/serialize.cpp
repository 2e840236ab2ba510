#include "fdgp/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdgp {

namespace {

constexpr const char* kMagic = "FDGP-CHECKPOINT";

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, data + i, sizeof(double));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(double));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(double));
  }
}

void read_doubles(std::istream& in, double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[sizeof(double)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(double)))
      throw FormatError("truncated binary payload");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(double));
    std::memcpy(data + i, bytes, sizeof(double));
  }
}

}  // namespace

std::string layout_descriptor(const Layout& layout) {
  std::ostringstream os;
  for (const auto& seg : layout)
    os << seg.name << ' ' << seg.offset << ' ' << seg.rows << ' ' << seg.cols << '\n';
  return os.str();
}

Layout parse_layout_descriptor(const std::string& text) {
  Layout layout;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Segment seg;
    if (!(ls >> seg.name >> seg.offset >> seg.rows >> seg.cols))
      throw FormatError("bad layout line: " + line);
    layout.push_back(seg);
  }
  return layout;
}

void write_param_snapshot(const std::filesystem::path& path, const FeatureMapParams& params) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw FormatError("cannot write " + path.string());
  write_doubles(bin, params.flat().data(), static_cast<std::size_t>(params.size()));
  std::ofstream txt(path.string() + ".layout");
  if (!txt) throw FormatError("cannot write " + path.string() + ".layout");
  txt << layout_descriptor(params.layout());
}

FeatureMapParams read_param_snapshot(const std::filesystem::path& path) {
  std::ifstream txt(path.string() + ".layout");
  if (!txt) throw FormatError("cannot read " + path.string() + ".layout");
  std::stringstream buf;
  buf << txt.rdbuf();
  Layout layout = parse_layout_descriptor(buf.str());
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw FormatError("cannot read " + path.string());
  VectorXd flat(layout_size(layout));
  read_doubles(bin, flat.data(), static_cast<std::size_t>(flat.size()));
  if (bin.peek() != std::char_traits<char>::eof())
    throw FormatError(path.string() + ": payload longer than layout");
  return FeatureMapParams(std::move(flat), std::move(layout));
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("bad generator state");
}

const MatrixXd& Checkpoint::matrix(const std::string& name) const {
  for (const auto& [key, m] : matrices)
    if (key == name) return m;
  throw std::out_of_range("checkpoint has no matrix '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << ' ' << Checkpoint::kVersion << '\n';
  out << "kind " << ckpt.kind << '\n';
  out << "iteration " << ckpt.iteration << '\n';
  out << "w " << ckpt.theta.w.size() << '\n';
  out << "alpha " << ckpt.theta.alpha.size() << '\n';
  for (const auto& seg : ckpt.theta.alpha.layout())
    out << "segment " << seg.name << ' ' << seg.offset << ' ' << seg.rows << ' ' << seg.cols << '\n';
  for (const auto& [name, m] : ckpt.matrices)
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  out << "rng " << ckpt.rng << '\n';
  out << '\n';
  const VectorXd packed = ckpt.theta.pack();
  write_doubles(out, packed.data(), static_cast<std::size_t>(packed.size()));
  for (const auto& [name, m] : ckpt.matrices)
    write_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty checkpoint");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic) throw FormatError("not a checkpoint");
    if (version != Checkpoint::kVersion)
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  Eigen::Index w_size = -1, alpha_size = -1;
  Layout layout;
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> shapes;
  while (std::getline(in, line) && !line.empty()) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      ls >> ckpt.kind;
    } else if (key == "iteration") {
      ls >> ckpt.iteration;
    } else if (key == "w") {
      ls >> w_size;
    } else if (key == "alpha") {
      ls >> alpha_size;
    } else if (key == "segment") {
      Segment seg;
      ls >> seg.name >> seg.offset >> seg.rows >> seg.cols;
      layout.push_back(seg);
    } else if (key == "matrix") {
      std::string name;
      Eigen::Index r = 0, c = 0;
      ls >> name >> r >> c;
      shapes.push_back({name, {r, c}});
    } else if (key == "rng") {
      ckpt.rng = line.size() > 4 ? line.substr(4) : "";
    } else {
      throw FormatError("unknown checkpoint header key '" + key + "'");
    }
    if (ls.fail()) throw FormatError("bad checkpoint header line: " + line);
  }
  if (w_size < 0 || alpha_size < 0 || layout_size(layout) != alpha_size)
    throw FormatError("incomplete checkpoint header");
  VectorXd packed(w_size + alpha_size + 1);
  read_doubles(in, packed.data(), static_cast<std::size_t>(packed.size()));
  ckpt.theta.w = VectorXd::Zero(w_size);
  ckpt.theta.alpha = FeatureMapParams(VectorXd::Zero(alpha_size), layout);
  ckpt.theta.unpack(packed);
  for (const auto& [name, shape] : shapes) {
    MatrixXd m(shape.first, shape.second);
    read_doubles(in, m.data(), static_cast<std::size_t>(m.size()));
    ckpt.matrices.emplace_back(name, std::move(m));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_checkpoint(in);
}

Checkpoint checkpoint_of(const SCGDState& state, const Rng& rng) {
  return Checkpoint{"scgd", state.t, state.theta, {{"F_tilde", state.F_tilde}}, rng_state(rng)};
}

Checkpoint checkpoint_of(const AugmentedState& zeta, const DualVariable& B, std::int64_t iteration,
                         const Rng& rng) {
  return Checkpoint{"minimax", iteration, zeta.theta, {{"A", zeta.A}, {"B", B.B}}, rng_state(rng)};
}

Checkpoint checkpoint_of(const HyperParams& theta, std::int64_t iteration, const Rng& rng) {
  return Checkpoint{"bsgd", iteration, theta, {}, rng_state(rng)};
}

}  // namespace fdgp
