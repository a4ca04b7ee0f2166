#include "netregime/tensor.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netregime/errors.hpp"

namespace netregime {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << fmt_double(m(i, j));
    }
    out << '\n';
  }
}

void write_csv_matrix_int(const Eigen::MatrixXi& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

Eigen::MatrixXi read_csv_matrix_int(const std::filesystem::path& path, int n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Eigen::MatrixXi m(n, n);
  std::string line;
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated matrix in " + path.string());
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < n; ++j) {
      if (!std::getline(ss, cell, ',')) throw IoError("short row in " + path.string());
      m(i, j) = std::stoi(cell);
    }
  }
  return m;
}

}  // namespace

WeekIndex assign_week(const Date& date, const Date& epoch_start) {
  const long days = days_between(epoch_start, date);
  if (days < 0) {
    throw ValidationError("date " + to_iso(date) + " precedes epoch start " +
                          to_iso(epoch_start));
  }
  WeekIndex w;
  w.t = static_cast<int>(days / 7) + 1;
  w.start = add_days(epoch_start, static_cast<long>(w.t - 1) * 7);
  w.end = add_days(w.start, 6);
  return w;
}

std::vector<WeekIndex> make_weeks(const Date& epoch_start, int n_weeks) {
  std::vector<WeekIndex> weeks;
  weeks.reserve(n_weeks);
  for (int t = 1; t <= n_weeks; ++t) {
    WeekIndex w;
    w.t = t;
    w.start = add_days(epoch_start, static_cast<long>(t - 1) * 7);
    w.end = add_days(w.start, 6);
    weeks.push_back(w);
  }
  return weeks;
}

OccurrenceMatrix build_occurrence_matrix(
    const std::vector<std::pair<std::string, std::set<std::string>>>& week_articles,
    const KeyFigureSet& figures) {
  OccurrenceMatrix occ;
  const int n = figures.size();
  occ.indicators = Eigen::MatrixXi::Zero(n, static_cast<Eigen::Index>(week_articles.size()));
  occ.article_ids.reserve(week_articles.size());
  for (std::size_t j = 0; j < week_articles.size(); ++j) {
    occ.article_ids.push_back(week_articles[j].first);
    for (const auto& name : week_articles[j].second) {
      const auto it = figures.index.find(name);
      if (it == figures.index.end()) {
        throw ValidationError("mention '" + name + "' is not a selected key figure");
      }
      occ.indicators(it->second, static_cast<Eigen::Index>(j)) = 1;
    }
  }
  return occ;
}

Eigen::MatrixXi cooccurrence_slice(const OccurrenceMatrix& occurrence, bool zero_diagonal) {
  Eigen::MatrixXi slice = occurrence.indicators * occurrence.indicators.transpose();
  if (zero_diagonal) slice.diagonal().setZero();
  return slice;
}

CooccurrenceTensor assemble_tensor(std::vector<Eigen::MatrixXi> weekly_slices,
                                   KeyFigureSet figures, std::vector<WeekIndex> weeks) {
  if (weekly_slices.size() != weeks.size()) {
    throw ValidationError("tensor assembly: " + std::to_string(weekly_slices.size()) +
                          " slices for " + std::to_string(weeks.size()) + " weeks");
  }
  const int n = figures.size();
  for (std::size_t t = 0; t < weekly_slices.size(); ++t) {
    const auto& Y = weekly_slices[t];
    if (Y.rows() != n || Y.cols() != n) {
      throw ValidationError("tensor assembly: slice " + std::to_string(t + 1) +
                            " is not " + std::to_string(n) + "x" + std::to_string(n));
    }
    for (int i = 0; i < n; ++i) {
      if (Y(i, i) != 0) {
        throw ValidationError("tensor invariant violated at (t=" + std::to_string(t + 1) +
                              ", i=" + std::to_string(i) + ", j=" + std::to_string(i) +
                              "): nonzero diagonal");
      }
      for (int j = i + 1; j < n; ++j) {
        if (Y(i, j) != Y(j, i)) {
          throw ValidationError("tensor invariant violated at (t=" + std::to_string(t + 1) +
                                ", i=" + std::to_string(i) + ", j=" + std::to_string(j) +
                                "): asymmetric entry");
        }
        if (Y(i, j) < 0) {
          throw ValidationError("tensor invariant violated at (t=" + std::to_string(t + 1) +
                                ", i=" + std::to_string(i) + ", j=" + std::to_string(j) +
                                "): negative count");
        }
      }
    }
  }
  CooccurrenceTensor tensor;
  tensor.Y = std::move(weekly_slices);
  tensor.figures = std::move(figures);
  tensor.weeks = std::move(weeks);
  return tensor;
}

CooccurrenceTensor drop_figures(const CooccurrenceTensor& tensor,
                                const std::vector<std::string>& names) {
  std::set<int> dropped;
  for (const auto& name : names) {
    const auto it = tensor.figures.index.find(name);
    if (it == tensor.figures.index.end()) {
      throw ValidationError("cannot drop unknown figure '" + name + "'");
    }
    dropped.insert(it->second);
  }
  std::vector<int> keep;
  std::vector<std::string> kept_names;
  for (int i = 0; i < tensor.n(); ++i) {
    if (!dropped.count(i)) {
      keep.push_back(i);
      kept_names.push_back(tensor.figures.names[i]);
    }
  }
  const int m = static_cast<int>(keep.size());
  std::vector<Eigen::MatrixXi> slices;
  slices.reserve(tensor.Y.size());
  for (const auto& Y : tensor.Y) {
    Eigen::MatrixXi sub(m, m);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) sub(a, b) = Y(keep[a], keep[b]);
    }
    slices.push_back(std::move(sub));
  }
  return assemble_tensor(std::move(slices),
                         KeyFigureSet::from_ordered_names(std::move(kept_names)),
                         tensor.weeks);
}

DegreeCorrection degree_correct(const Eigen::MatrixXd& Y) {
  if (Y.rows() != Y.cols()) throw ValidationError("degree correction: matrix not square");
  const double asym = (Y - Y.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9) {
    throw ValidationError("degree correction: matrix not symmetric (max deviation " +
                          fmt_double(asym) + ")");
  }
  const int n = static_cast<int>(Y.rows());
  DegreeCorrection out;
  if (Y.cwiseAbs().maxCoeff() == 0.0) {
    out.Omega = Eigen::MatrixXd::Zero(n, n);
    out.B = Eigen::MatrixXd::Zero(n, n);
    out.principal_eigenvalue = 0.0;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Y);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("degree correction: eigendecomposition failed");
  }
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const int lo = 0;
  const int hi = n - 1;
  int pick;
  const double abs_lo = std::abs(evals(lo));
  const double abs_hi = std::abs(evals(hi));
  if (abs_lo > abs_hi) {
    pick = lo;
  } else if (abs_hi > abs_lo) {
    pick = hi;
  } else {
    // Tie in modulus: prefer the positive eigenvalue.
    pick = evals(hi) >= 0.0 ? hi : lo;
    std::cerr << "[netregime] warning: eigenvalue modulus tie (" << evals(lo) << ", "
              << evals(hi) << "); picking " << evals(pick) << "\n";
  }
  const double lambda = evals(pick);
  Eigen::VectorXd u = solver.eigenvectors().col(pick);
  // Sign convention: largest-magnitude entry positive.
  Eigen::Index imax;
  u.cwiseAbs().maxCoeff(&imax);
  if (u(imax) < 0.0) u = -u;
  out.Omega = lambda * u * u.transpose();
  out.B = Y - out.Omega;
  out.principal_eigenvalue = lambda;
  return out;
}

CorrectedTensor degree_correct_tensor(const CooccurrenceTensor& tensor) {
  CorrectedTensor out;
  out.figures = tensor.figures;
  out.weeks = tensor.weeks;
  out.B.reserve(tensor.t());
  out.Omega.reserve(tensor.t());
  for (const auto& Y : tensor.Y) {
    DegreeCorrection dc = degree_correct(Y.cast<double>());
    out.B.push_back(std::move(dc.B));
    out.Omega.push_back(std::move(dc.Omega));
    out.principal_eigenvalues.push_back(dc.principal_eigenvalue);
  }
  return out;
}

Eigen::MatrixXd degree_centrality(const CooccurrenceTensor& tensor) {
  Eigen::MatrixXd deg = Eigen::MatrixXd::Zero(tensor.n(), tensor.t());
  for (int t = 0; t < tensor.t(); ++t) {
    deg.col(t) = tensor.Y[t].cast<double>().rowwise().sum();
  }
  return deg;
}

namespace {

// Brandes accumulation on one unweighted graph given as an adjacency list.
Eigen::VectorXd brandes_betweenness(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(n);
  std::vector<int> order;
  std::vector<std::vector<int>> preds(n);
  std::vector<long> sigma(n);
  std::vector<int> dist(n);
  std::vector<double> delta(n);
  for (int s = 0; s < n; ++s) {
    order.clear();
    for (int v = 0; v < n; ++v) {
      preds[v].clear();
      sigma[v] = 0;
      dist[v] = -1;
      delta[v] = 0.0;
    }
    sigma[s] = 1;
    dist[s] = 0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (int w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int w = *it;
      for (int v : preds[w]) {
        delta[v] += static_cast<double>(sigma[v]) / static_cast<double>(sigma[w]) *
                    (1.0 + delta[w]);
      }
      if (w != s) bc(w) += delta[w];
    }
  }
  // Each unordered pair was accumulated from both endpoints.
  return bc / 2.0;
}

}  // namespace

Eigen::MatrixXd betweenness_centrality(const CooccurrenceTensor& tensor) {
  const int n = tensor.n();
  Eigen::MatrixXd bc = Eigen::MatrixXd::Zero(n, tensor.t());
  for (int t = 0; t < tensor.t(); ++t) {
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && tensor.Y[t](i, j) > 0) adj[i].push_back(j);
      }
    }
    bc.col(t) = brandes_betweenness(adj);
  }
  return bc;
}

void save_tensor(const CooccurrenceTensor& tensor, const std::filesystem::path& dir,
                 const CorrectedTensor* corrected) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  nlohmann::json meta;
  meta["N"] = tensor.n();
  meta["T"] = tensor.t();
  meta["figures"] = tensor.figures.names;
  nlohmann::json weeks = nlohmann::json::array();
  for (const auto& w : tensor.weeks) {
    weeks.push_back({{"t", w.t}, {"start", to_iso(w.start)}, {"end", to_iso(w.end)}});
  }
  meta["weeks"] = weeks;
  std::ofstream meta_out(dir / "meta.json");
  if (!meta_out) throw IoError("cannot write " + (dir / "meta.json").string());
  meta_out << meta.dump(2) << '\n';

  for (int t = 0; t < tensor.t(); ++t) {
    write_csv_matrix_int(tensor.Y[t], dir / ("Y_" + std::to_string(t + 1) + ".csv"));
  }
  if (corrected) {
    for (int t = 0; t < corrected->t(); ++t) {
      write_csv_matrix(corrected->B[t], dir / ("B_" + std::to_string(t + 1) + ".csv"));
    }
  }
}

CooccurrenceTensor load_tensor(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw IoError("cannot read " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad meta.json in " + dir.string() + ": " + e.what());
  }
  const int n = meta.at("N").get<int>();
  const int t_count = meta.at("T").get<int>();
  auto figures = KeyFigureSet::from_ordered_names(
      meta.at("figures").get<std::vector<std::string>>());
  if (figures.size() != n) throw ValidationError("meta.json: N does not match figure list");
  std::vector<WeekIndex> weeks;
  for (const auto& w : meta.at("weeks")) {
    weeks.push_back({w.at("t").get<int>(), parse_date(w.at("start").get<std::string>()),
                     parse_date(w.at("end").get<std::string>())});
  }
  if (static_cast<int>(weeks.size()) != t_count) {
    throw ValidationError("meta.json: T does not match week list");
  }
  std::vector<Eigen::MatrixXi> slices;
  slices.reserve(t_count);
  for (int t = 1; t <= t_count; ++t) {
    slices.push_back(read_csv_matrix_int(dir / ("Y_" + std::to_string(t) + ".csv"), n));
  }
  return assemble_tensor(std::move(slices), std::move(figures), std::move(weeks));
}

void save_centrality_csv(const Eigen::MatrixXd& values, const CooccurrenceTensor& tensor,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "figure";
  for (const auto& w : tensor.weeks) out << ",week_" << w.t;
  out << '\n';
  for (int i = 0; i < tensor.n(); ++i) {
    out << tensor.figures.names[i];
    for (int t = 0; t < tensor.t(); ++t) out << ',' << fmt_double(values(i, t));
    out << '\n';
  }
}

}  // namespace netregime
