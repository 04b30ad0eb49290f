#include "echoclutter/svd_filter.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {

Eigen::MatrixXd to_matrix(const CasoratiBlock& b) {
  Eigen::MatrixXd a(b.roi * b.roi, b.frames);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index f = 0; f < a.cols(); ++f) a(i, f) = b.at(i, f);
  return a;
}

std::string origin(const CasoratiBlock& b) {
  return "(" + std::to_string(b.row) + ", " + std::to_string(b.col) + ")";
}

}  // namespace

void SvdFilterConfig::validate(std::uint32_t frames) const {
  if (roi < 1) throw ParameterError("svd roi must be >= 1");
  const std::uint32_t rank_cap = std::min(roi * roi, frames);
  if (drop_count >= rank_cap) {
    throw ParameterError("svd drop count " + std::to_string(drop_count) + " must be below min(roi^2, F) = " +
                         std::to_string(rank_cap));
  }
}

CasoratiBlock build_casorati(const Volume& v, std::uint32_t row, std::uint32_t col, std::uint32_t roi) {
  const Dims& d = v.dims();
  if (roi == 0 || row + roi > d.height || col + roi > d.width) {
    throw DimensionError("tile at (" + std::to_string(row) + ", " + std::to_string(col) + ") of size " +
                         std::to_string(roi) + " leaves image " + to_string(d));
  }
  CasoratiBlock b{row, col, roi, d.frames, std::vector<double>(static_cast<std::size_t>(roi) * roi * d.frames)};
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < roi; ++r)
      for (std::uint32_t c = 0; c < roi; ++c) b.values[(r * roi + c) * d.frames + f] = v.at(f, row + r, col + c);
  return b;
}

void scatter_casorati(const CasoratiBlock& b, Volume& v) {
  const Dims& d = v.dims();
  if (b.row + b.roi > d.height || b.col + b.roi > d.width || b.frames != d.frames) {
    throw DimensionError("block at " + origin(b) + " does not fit " + to_string(d));
  }
  for (std::uint32_t f = 0; f < b.frames; ++f)
    for (std::uint32_t r = 0; r < b.roi; ++r)
      for (std::uint32_t c = 0; c < b.roi; ++c)
        v.at(f, b.row + r, b.col + c) = static_cast<float>(b.values[(r * b.roi + c) * b.frames + f]);
}

std::vector<double> singular_values(const CasoratiBlock& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_matrix(b));
  const auto& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

CasoratiBlock filter_block(const CasoratiBlock& b, std::uint32_t k) {
  const Eigen::MatrixXd a = to_matrix(b);
  const auto rank_cap = static_cast<std::uint32_t>(std::min(a.rows(), a.cols()));
  if (k >= rank_cap && !(k == 0 && rank_cap == 0)) {
    throw ParameterError("drop count " + std::to_string(k) + " must be below " + std::to_string(rank_cap));
  }
  // Jacobi sweeps on NaN input can return finite garbage, so screen first.
  if (!a.allFinite()) throw NumericError("non-finite values in tile at " + origin(b));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  if (!s.allFinite() || !svd.matrixU().allFinite() || !svd.matrixV().allFinite()) {
    throw NumericError("SVD failed for tile at " + origin(b));
  }
  s.head(k).setZero();
  const Eigen::MatrixXd out = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  if (!out.allFinite()) throw NumericError("SVD reconstruction overflowed for tile at " + origin(b));
  CasoratiBlock r = b;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index f = 0; f < out.cols(); ++f) r.values[i * b.frames + f] = out(i, f);
  return r;
}

Volume svd_filter_volume(const Volume& v, const SvdFilterConfig& cfg, SvdFilterReport* report) {
  const Dims d = v.dims();
  cfg.validate(d.frames);
  const std::uint32_t ph = (d.height + cfg.roi - 1) / cfg.roi * cfg.roi;
  const std::uint32_t pw = (d.width + cfg.roi - 1) / cfg.roi * cfg.roi;
  const bool padded = ph != d.height || pw != d.width;
  Volume work(Dims{ph, pw, d.frames});
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < ph; ++r)
      for (std::uint32_t c = 0; c < pw; ++c) work.at(f, r, c) = v.at(f, std::min(r, d.height - 1), std::min(c, d.width - 1));

  Volume filtered(work.dims());
  std::size_t tiles = 0;
  for (std::uint32_t r = 0; r < ph; r += cfg.roi) {
    for (std::uint32_t c = 0; c < pw; c += cfg.roi) {
      scatter_casorati(filter_block(build_casorati(work, r, c, cfg.roi), cfg.drop_count), filtered);
      ++tiles;
    }
  }
  Volume out(d);
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < d.height; ++r)
      for (std::uint32_t c = 0; c < d.width; ++c) out.at(f, r, c) = filtered.at(f, r, c);
  if (report) *report = {padded, ph, pw, tiles};
  return out;
}

Sequence svd_filter_sequence(const Sequence& s, const SvdFilterConfig& cfg, SvdFilterReport* report) {
  return Sequence::clamped(svd_filter_volume(s.volume(), cfg, report));
}

}  // namespace echoclutter
