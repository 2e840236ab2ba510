#include "fdgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fdgp {

void Dataset::validate() const {
  if (X.rows() != y.size())
    throw std::invalid_argument("dataset: " + std::to_string(X.rows()) + " feature rows but " +
                                std::to_string(y.size()) + " targets");
  if (!X.allFinite() || !y.allFinite())
    throw std::invalid_argument("dataset: non-finite entry");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
    out.y(static_cast<Eigen::Index>(k)) = y(rows[k]);
  }
  out.names = names;
  return out;
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const ColumnSelector& target) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw CsvError(path.string() + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header;
  for (auto cell : split_line(line)) header.emplace_back(trim(cell));

  const auto cols = static_cast<Eigen::Index>(header.size());
  Eigen::Index target_col = -1;
  if (const auto* name = std::get_if<std::string>(&target)) {
    auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw CsvError(path.string() + ": target column '" + *name + "' absent");
    target_col = it - header.begin();
  } else {
    target_col = std::get<Eigen::Index>(target);
    if (target_col < 0 || target_col >= cols)
      throw CsvError(path.string() + ": target column index " + std::to_string(target_col) +
                     " absent (" + std::to_string(cols) + " columns)");
  }

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++rows;
    auto cells = split_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      throw CsvError(path.string() + ": row " + std::to_string(rows) + " has " +
                     std::to_string(cells.size()) + " cells, expected " + std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      auto cell = trim(cells[static_cast<std::size_t>(c)]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw CsvError(path.string() + ": row " + std::to_string(rows) + ", column '" +
                       header[static_cast<std::size_t>(c)] + "': invalid value '" +
                       std::string(cell) + "'");
      values.push_back(v);
    }
  }
  if (rows == 0) throw CsvError(path.string() + ": no data rows");

  Dataset d;
  d.X.resize(rows, cols - 1);
  d.y.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::Index out = 0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double v = values[static_cast<std::size_t>(r * cols + c)];
      if (c == target_col) {
        d.y(r) = v;
      } else {
        d.X(r, out++) = v;
      }
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c)
    if (c != target_col) d.names.push_back(header[static_cast<std::size_t>(c)]);
  return d;
}

void save_csv(const std::filesystem::path& path, const Dataset& d, const std::string& target_name) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path.string());
  for (Eigen::Index c = 0; c < d.dim(); ++c) {
    const auto idx = static_cast<std::size_t>(c);
    out << (idx < d.names.size() ? d.names[idx] : "x" + std::to_string(c)) << ',';
  }
  out << target_name << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    for (Eigen::Index c = 0; c < d.dim(); ++c) out << d.X(r, c) << ',';
    out << d.y(r) << '\n';
  }
}

MatrixXd Scaler::transform(const MatrixXd& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

MatrixXd Scaler::inverse_transform(const MatrixXd& Z) const {
  return (Z.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

VectorXd Scaler::transform_targets(const VectorXd& y) const {
  return (y.array() - y_mean) / y_scale;
}

VectorXd Scaler::inverse_transform_targets(const VectorXd& t) const {
  return t.array() * y_scale + y_mean;
}

namespace {

// Population moments; zero spread reports deviation 1.
std::pair<double, double> moments(const VectorXd& v, bool& is_constant) {
  const double n = static_cast<double>(v.size());
  const double m = v.sum() / n;
  const double var = (v.array() - m).square().sum() / n;
  is_constant = !(var > 0.0);
  return {m, is_constant ? 1.0 : std::sqrt(var)};
}

}  // namespace

std::pair<Dataset, Scaler> standardize(const Dataset& d) {
  d.validate();
  Scaler s;
  s.mean.resize(d.dim());
  s.scale.resize(d.dim());
  s.constant.resize(static_cast<std::size_t>(d.dim()));
  for (Eigen::Index c = 0; c < d.dim(); ++c) {
    bool constant = false;
    auto [m, sd] = moments(d.X.col(c), constant);
    s.mean(c) = m;
    s.scale(c) = sd;
    s.constant[static_cast<std::size_t>(c)] = constant;
  }
  bool constant_y = false;
  std::tie(s.y_mean, s.y_scale) = moments(d.y, constant_y);

  Dataset out;
  out.X = s.transform(d.X);
  out.y = s.transform_targets(d.y);
  out.names = d.names;
  return {std::move(out), std::move(s)};
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  auto [train, test] = split_indices(d.size(), train_fraction, seed);
  return {d.subset(train), d.subset(test)};
}

IndexBatch sample_batch(Eigen::Index n, std::size_t s, Rng& rng) {
  if (s == 0) throw std::invalid_argument("sample_batch: batch size must be positive");
  if (n < 1) throw std::invalid_argument("sample_batch: empty population");
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  IndexBatch b;
  b.n = n;
  b.indices.resize(s);
  for (auto& i : b.indices) i = pick(rng);
  return b;
}

EpochSampler::EpochSampler(Eigen::Index n, std::size_t s)
    : n_(n), s_(s), perm_(static_cast<std::size_t>(n)), cursor_(static_cast<std::size_t>(n)) {
  if (s == 0) throw std::invalid_argument("EpochSampler: batch size must be positive");
  if (n < 1) throw std::invalid_argument("EpochSampler: empty population");
  std::iota(perm_.begin(), perm_.end(), Eigen::Index{0});
}

IndexBatch EpochSampler::next(Rng& rng) {
  if (cursor_ >= perm_.size()) {
    std::shuffle(perm_.begin(), perm_.end(), rng);
    cursor_ = 0;
  }
  const std::size_t end = std::min(perm_.size(), cursor_ + s_);
  IndexBatch b;
  b.n = n_;
  b.indices.assign(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                   perm_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return b;
}

}  // namespace fdgp
