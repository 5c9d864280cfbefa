#include "mriv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mriv/rng.hpp"

namespace mriv {

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("parse failure at row " + std::to_string(row) + ": '" + s + "'");
  }
  return value;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<Eigen::Index> Dataset::arm_indices(int z) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n(); ++i) {
    if (instrument[i] == static_cast<double>(z)) idx.push_back(i);
  }
  return idx;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  out.covariates.resize(m, p());
  out.instrument.resize(m);
  out.treatment.resize(m);
  out.outcome.resize(m);
  if (oracle_cate) out.oracle_cate.emplace(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    out.covariates.row(i) = covariates.row(r);
    out.instrument[i] = instrument[r];
    out.treatment[i] = treatment[r];
    out.outcome[i] = outcome[r];
    if (oracle_cate) (*out.oracle_cate)[i] = (*oracle_cate)[r];
  }
  return out;
}

std::optional<std::string> validate(const Dataset& d) {
  const Eigen::Index n = d.covariates.rows();
  if (n < 2) return "dataset has fewer than 2 rows";
  if (d.instrument.size() != n || d.treatment.size() != n || d.outcome.size() != n) {
    return "column length mismatch";
  }
  if (d.oracle_cate && d.oracle_cate->size() != n) return "column length mismatch (tau)";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d.covariates.cols(); ++j) {
      if (!std::isfinite(d.covariates(i, j))) {
        return "non-finite value at row " + std::to_string(i);
      }
    }
    if (!std::isfinite(d.instrument[i]) || !std::isfinite(d.treatment[i]) ||
        !std::isfinite(d.outcome[i]) ||
        (d.oracle_cate && !std::isfinite((*d.oracle_cate)[i]))) {
      return "non-finite value at row " + std::to_string(i);
    }
    if (!is_binary(d.instrument[i])) {
      return "non-binary instrument at row " + std::to_string(i);
    }
    if (!is_binary(d.treatment[i])) {
      return "non-binary treatment at row " + std::to_string(i);
    }
  }
  const double z_sum = d.instrument.sum();
  if (z_sum == 0.0 || z_sum == static_cast<double>(n)) {
    return "instrument arm empty";
  }
  return std::nullopt;
}

void require_valid(const Dataset& d) {
  if (auto violation = validate(d)) {
    throw std::invalid_argument("invalid dataset: " + *violation);
  }
}

Dataset load_dataset(const std::string& path, bool has_oracle) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  // Canonical column order: x_1..x_p, z, a, y, [tau].
  std::size_t ncols = header.size();
  bool has_tau = ncols > 0 && header.back() == "tau";
  std::size_t base = has_tau ? ncols - 1 : ncols;
  if (base < 4) throw std::runtime_error("missing column: need x_1,z,a,y at least");
  std::size_t px = base - 3;
  for (std::size_t j = 0; j < px; ++j) {
    const std::string expect = "x_" + std::to_string(j + 1);
    if (header[j] != expect) {
      throw std::runtime_error("missing column: expected '" + expect + "', found '" + header[j] + "'");
    }
  }
  if (header[px] != "z") throw std::runtime_error("missing column: z");
  if (header[px + 1] != "a") throw std::runtime_error("missing column: a");
  if (header[px + 2] != "y") throw std::runtime_error("missing column: y");
  if (has_oracle && !has_tau) throw std::runtime_error("missing column: tau");

  std::vector<std::vector<double>> rows;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != ncols) {
      throw std::runtime_error("parse failure at row " + std::to_string(row_index) +
                               ": expected " + std::to_string(ncols) + " fields, found " +
                               std::to_string(fields.size()));
    }
    std::vector<double> values(ncols);
    for (std::size_t j = 0; j < ncols; ++j) values[j] = parse_number(fields[j], row_index);
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite number at row " + std::to_string(row_index));
      }
    }
    if (!is_binary(values[px])) {
      throw std::runtime_error("non-binary instrument at row " + std::to_string(row_index));
    }
    if (!is_binary(values[px + 1])) {
      throw std::runtime_error("non-binary treatment at row " + std::to_string(row_index));
    }
    rows.push_back(std::move(values));
    ++row_index;
  }

  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  d.covariates.resize(n, static_cast<Eigen::Index>(px));
  d.instrument.resize(n);
  d.treatment.resize(n);
  d.outcome.resize(n);
  if (has_tau) d.oracle_cate.emplace(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < px; ++j) d.covariates(i, static_cast<Eigen::Index>(j)) = v[j];
    d.instrument[i] = v[px];
    d.treatment[i] = v[px + 1];
    d.outcome[i] = v[px + 2];
    if (has_tau) (*d.oracle_cate)[i] = v[px + 3];
  }
  require_valid(d);
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (Eigen::Index j = 0; j < d.p(); ++j) out << "x_" << (j + 1) << ",";
  out << "z,a,y";
  if (d.oracle_cate) out << ",tau";
  out << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) {
      put(d.covariates(i, j));
      out << ",";
    }
    out << static_cast<int>(d.instrument[i]) << "," << static_cast<int>(d.treatment[i]) << ",";
    put(d.outcome[i]);
    if (d.oracle_cate) {
      out << ",";
      put((*d.oracle_cate)[i]);
    }
    out << "\n";
  }
}

DataSplit split_train_test(const Dataset& d, double test_fraction, std::uint64_t seed) {
  require_valid(d);
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0,1)");
  }
  const auto n = static_cast<std::size_t>(d.n());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n - n_test < 1) {
    throw std::invalid_argument("degenerate split: empty train or test part");
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    rng::Stream stream(rng::derive(seed, "train-test-split", static_cast<std::uint64_t>(attempt)));
    auto perm = stream.permutation(n);
    DataSplit split;
    split.test_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    bool has0 = false, has1 = false;
    for (auto i : split.train_indices) {
      if (d.instrument[static_cast<Eigen::Index>(i)] == 1.0) has1 = true;
      else has0 = true;
      if (has0 && has1) break;
    }
    if (has0 && has1) {
      std::sort(split.train_indices.begin(), split.train_indices.end());
      std::sort(split.test_indices.begin(), split.test_indices.end());
      return split;
    }
  }
  throw std::runtime_error("degenerate split: an instrument arm stayed empty after 100 redraws");
}

}  // namespace mriv
