#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "netregime/corpus.hpp"
#include "netregime/dates.hpp"

namespace netregime {

/// Week t (1-based) with its inclusive date span.
struct WeekIndex {
  int t = 1;
  Date start;
  Date end;
};

/// Maps a date to its 7-day week relative to the epoch start:
/// t = floor(days/7) + 1. Throws ValidationError for dates before the epoch.
WeekIndex assign_week(const Date& date, const Date& epoch_start);

/// Consecutive weeks 1..T starting at epoch_start.
std::vector<WeekIndex> make_weeks(const Date& epoch_start, int n_weeks);

/// Key figure x article 0/1 occurrence indicators for one week.
struct OccurrenceMatrix {
  Eigen::MatrixXi indicators;           // N x (articles in week)
  std::vector<std::string> article_ids;  // column order
};

OccurrenceMatrix build_occurrence_matrix(
    const std::vector<std::pair<std::string, std::set<std::string>>>& week_articles,
    const KeyFigureSet& figures);

/// A * A^T with the diagonal zeroed (configurable): entry (i, j) counts the
/// week's articles mentioning both figure i and figure j.
Eigen::MatrixXi cooccurrence_slice(const OccurrenceMatrix& occurrence,
                                   bool zero_diagonal = true);

/// Weekly stack of symmetric co-occurrence counts.
struct CooccurrenceTensor {
  std::vector<Eigen::MatrixXi> Y;  // T layers, each N x N
  KeyFigureSet figures;
  std::vector<WeekIndex> weeks;

  int n() const { return figures.size(); }
  int t() const { return static_cast<int>(Y.size()); }
};

/// Assembles and validates the tensor; any invariant violation (asymmetry,
/// negative entry, nonzero diagonal) aborts with the offending (t, i, j).
CooccurrenceTensor assemble_tensor(std::vector<Eigen::MatrixXi> weekly_slices,
                                   KeyFigureSet figures, std::vector<WeekIndex> weeks);

/// Tensor restricted to the figures not named; remaining indices remapped
/// densely in their original order. Unknown names are errors.
CooccurrenceTensor drop_figures(const CooccurrenceTensor& tensor,
                                const std::vector<std::string>& names);

/// Rank-1 spectral null model of one layer: Omega = lambda * u * u^T with
/// lambda the eigenvalue of largest modulus (sign preserved) and u its unit
/// eigenvector, sign-fixed so the largest-magnitude entry is positive.
struct DegreeCorrection {
  Eigen::MatrixXd B;      // Y - Omega
  Eigen::MatrixXd Omega;
  double principal_eigenvalue = 0.0;
};

DegreeCorrection degree_correct(const Eigen::MatrixXd& Y);

/// Degree-corrected stack B_t = Y_t - Omega_t; Omega retained alongside so
/// the reconstruction Y_t = B_t + Omega_t is checkable.
struct CorrectedTensor {
  std::vector<Eigen::MatrixXd> B;
  std::vector<Eigen::MatrixXd> Omega;
  std::vector<double> principal_eigenvalues;
  KeyFigureSet figures;
  std::vector<WeekIndex> weeks;

  int n() const { return figures.size(); }
  int t() const { return static_cast<int>(B.size()); }
};

CorrectedTensor degree_correct_tensor(const CooccurrenceTensor& tensor);

/// Weighted row sums of Y_t; N x T.
Eigen::MatrixXd degree_centrality(const CooccurrenceTensor& tensor);

/// Unnormalized shortest-path betweenness on the binarized (Y_t > 0) graph,
/// each unordered pair counted once; N x T.
Eigen::MatrixXd betweenness_centrality(const CooccurrenceTensor& tensor);

/// Directory layout: meta.json (figures, weeks, N, T) plus Y_<t>.csv per week
/// (dense, comma-separated, row-major, no header). When `corrected` is given,
/// B_<t>.csv layers are written alongside.
void save_tensor(const CooccurrenceTensor& tensor, const std::filesystem::path& dir,
                 const CorrectedTensor* corrected = nullptr);

CooccurrenceTensor load_tensor(const std::filesystem::path& dir);

/// CSV with a header row of week labels and one row per figure.
void save_centrality_csv(const Eigen::MatrixXd& values, const CooccurrenceTensor& tensor,
                         const std::filesystem::path& path);

}  // namespace netregime
