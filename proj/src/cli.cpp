#include "netregime/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "netregime/corpus.hpp"
#include "netregime/errors.hpp"
#include "netregime/hmtm.hpp"
#include "netregime/selection.hpp"
#include "netregime/tensor.hpp"

namespace fs = std::filesystem;

namespace netregime {

namespace {

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest per output directory; the stored argv reproduces the run.
void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::string>& argv) {
  nlohmann::json j;
  j["tool"] = "netregime";
  j["version"] = NETREGIME_VERSION;
  j["command"] = command;
  j["created_utc"] = iso_utc_now();
  j["argv"] = argv;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = item.find_last_not_of(" \t");
    out.push_back(item.substr(begin, end - begin + 1));
  }
  return out;
}

struct BuildTensorArgs {
  std::string input;
  std::string out;
  std::string window_start = "2018-01-01";
  std::string window_end = "2018-06-17";
  std::string keyword = "Korea";
  std::string aliases = "data/aliases_default.tsv";
  std::string surnames = "data/surnames.txt";
  long min_mentions = 10;
  double min_week_frac = 0.25;
  std::string drop = "Kim Jong-un,Donald Trump,Moon Jae-in";
};

int cmd_build_tensor(const BuildTensorArgs& a, const std::vector<std::string>& argv) {
  const Date start = parse_date(a.window_start);
  const Date end = parse_date(a.window_end);
  if (end < start) throw ValidationError("window start must not follow window end");
  const long span_days = days_between(start, end) + 1;
  if (span_days % 7 != 0) {
    throw ValidationError("window must cover whole weeks; got " +
                          std::to_string(span_days) + " days");
  }
  const int T = static_cast<int>(span_days / 7);

  const LoadReport report = load_articles(a.input, DateRange{start, end});
  if (!report.errors.empty()) {
    const std::size_t shown = std::min<std::size_t>(report.errors.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      std::cerr << "[netregime] skipped line " << report.errors[i].line << ": "
                << report.errors[i].message << "\n";
    }
    if (report.errors.size() > shown) {
      std::cerr << "[netregime] ... and " << report.errors.size() - shown
                << " more bad lines\n";
    }
  }
  const std::vector<ArticleRecord> articles = filter_and_dedupe(report.articles, a.keyword);
  const AliasTable aliases = AliasTable::from_tsv(a.aliases);
  const SurnameLexicon lexicon = SurnameLexicon::from_file(a.surnames);

  MentionTable table(T);
  // week (0-based), article id, canonical mentions
  std::vector<std::tuple<int, std::string, std::set<std::string>>> article_mentions;
  for (const ArticleRecord& art : articles) {
    const int week = assign_week(art.date, start).t;
    const std::map<std::string, long> counts = extract_mention_counts(art, lexicon, aliases);
    std::set<std::string> names;
    for (const auto& [name, count] : counts) {
      table.add(name, week, count);
      names.insert(name);
    }
    article_mentions.emplace_back(week - 1, art.id, std::move(names));
  }

  const KeyFigureSet figures = select_key_figures(table, a.min_mentions, a.min_week_frac);
  if (figures.size() == 0) {
    throw ValidationError("no key figures met the mention thresholds");
  }

  std::vector<Eigen::MatrixXi> slices;
  for (int w = 0; w < T; ++w) {
    std::vector<std::pair<std::string, std::set<std::string>>> week_articles;
    for (const auto& [week, id, names] : article_mentions) {
      if (week != w) continue;
      std::set<std::string> kept;
      for (const std::string& n : names) {
        if (figures.index.count(n)) kept.insert(n);
      }
      week_articles.emplace_back(id, std::move(kept));
    }
    slices.push_back(cooccurrence_slice(build_occurrence_matrix(week_articles, figures)));
  }
  const CooccurrenceTensor full =
      assemble_tensor(std::move(slices), figures, make_weeks(start, T));

  ensure_dir(a.out);
  save_centrality_csv(degree_centrality(full), full, fs::path(a.out) / "degree.csv");
  save_centrality_csv(betweenness_centrality(full), full,
                      fs::path(a.out) / "betweenness.csv");
  {
    std::ofstream out(fs::path(a.out) / "mentions.csv");
    if (!out) throw IoError("cannot write mentions.csv");
    out << "figure";
    for (int w = 1; w <= T; ++w) out << ",week_" << w;
    out << '\n';
    for (const std::string& name : full.figures.names) {
      out << name;
      const auto it = table.counts.find(name);
      for (int w = 0; w < T; ++w) {
        out << ',' << (it == table.counts.end() ? 0 : it->second[w]);
      }
      out << '\n';
    }
  }

  std::vector<std::string> to_drop;
  for (const std::string& name : split_csv_list(a.drop)) {
    if (full.figures.index.count(name)) {
      to_drop.push_back(name);
    } else {
      std::cerr << "[netregime] drop name not among selected figures, ignored: " << name
                << "\n";
    }
  }
  const CooccurrenceTensor tensor = to_drop.empty() ? full : drop_figures(full, to_drop);
  const CorrectedTensor corrected = degree_correct_tensor(tensor);
  save_tensor(tensor, a.out, &corrected);
  write_manifest(a.out, "build-tensor", argv);

  std::cout << "articles kept: " << articles.size() << "\n"
            << "figures selected: " << full.figures.names.size() << " (dropped "
            << to_drop.size() << ")\n"
            << "tensor: N=" << tensor.n() << " T=" << tensor.t() << " -> " << a.out
            << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string input;
  std::string out;
  int breaks = 1;
  int dims = 2;
  int iters = 2000;
  int burnin = 1000;
  int thin = 5;
  std::uint64_t seed = 20180101;
};

// Fits load the raw tensor and degree-correct it themselves, so a tensor
// directory is the only input state a fit depends on.
std::vector<Eigen::MatrixXd> corrected_slices(const CooccurrenceTensor& tensor) {
  return degree_correct_tensor(tensor).B;
}

void write_dated_regime_summary(const FitResult& fit, const CooccurrenceTensor& tensor,
                                const fs::path& dir) {
  std::ofstream out(dir / "regime_summary.csv");
  if (!out) throw IoError("cannot write " + (dir / "regime_summary.csv").string());
  out << "week,week_start,week_end,modal_regime,modal_prob\n";
  for (int t = 0; t < tensor.t(); ++t) {
    out << t + 1 << ',' << to_iso(tensor.weeks[t].start) << ','
        << to_iso(tensor.weeks[t].end) << ',' << fit.modal_path[t] + 1 << ','
        << fmt_double(fit.state_probs(t, fit.modal_path[t])) << '\n';
  }
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  if (a.breaks < 0) throw ValidationError("break count must be non-negative");
  const CooccurrenceTensor tensor = load_tensor(a.input);
  ModelConfig config;
  config.n_regimes = a.breaks + 1;
  config.rank = a.dims;
  config.iters = a.iters;
  config.burnin = a.burnin;
  config.thin = a.thin;
  config.seed = a.seed;
  const HyperParams hyper;

  const FitResult fit = run_chain(corrected_slices(tensor), config, hyper);
  save_fit(fit, a.out);
  write_dated_regime_summary(fit, tensor, a.out);
  write_manifest(a.out, "fit", argv);

  std::cout << "regimes: " << config.n_regimes << ", retained draws: " << fit.draws.size()
            << ", final loglik: " << fit.loglik_trace.back() << "\n";
  for (int t = 1; t < tensor.t(); ++t) {
    if (fit.modal_path[t] != fit.modal_path[t - 1]) {
      std::cout << "modal change into regime " << fit.modal_path[t] + 1 << " at week "
                << t + 1 << " (" << to_iso(tensor.weeks[t].start) << ")\n";
    }
  }
  return kExitOk;
}

struct SelectArgs {
  std::string input;
  std::string out;
  std::string fits;  // defaults to out
  int kmax = 4;
  bool run_missing = false;
  int jobs = 0;
  int dims = 2;
  int iters = 2000;
  int burnin = 1000;
  int thin = 5;
  std::uint64_t seed = 20180101;
  int evidence_sweeps = 2000;
  int evidence_burnin = 200;
};

int cmd_select(const SelectArgs& a, const std::vector<std::string>& argv) {
  if (a.kmax < 0) throw ValidationError("kmax must be non-negative");
  const CooccurrenceTensor tensor = load_tensor(a.input);
  const std::vector<Eigen::MatrixXd> B = corrected_slices(tensor);
  const fs::path fits_dir = a.fits.empty() ? fs::path(a.out) : fs::path(a.fits);
  ensure_dir(fits_dir);

  auto fit_dir = [&fits_dir](int k) { return fits_dir / ("fit_k" + std::to_string(k)); };
  std::vector<int> missing;
  for (int k = 0; k <= a.kmax; ++k) {
    if (!fs::exists(fit_dir(k) / "summary.json")) missing.push_back(k);
  }
  if (!missing.empty() && !a.run_missing) {
    std::string list;
    for (int k : missing) list += (list.empty() ? "" : ", ") + std::to_string(k);
    throw ValidationError("missing fits for k = " + list +
                          "; run them first or pass --run-missing");
  }
  if (!missing.empty()) {
    const int jobs = a.jobs > 0
                         ? a.jobs
                         : std::max(1u, std::thread::hardware_concurrency());
    auto run_one = [&](int k) {
      ModelConfig config;
      config.n_regimes = k + 1;
      config.rank = a.dims;
      config.iters = a.iters;
      config.burnin = a.burnin;
      config.thin = a.thin;
      // Independent streams per candidate; the stride keeps them disjoint
      // from any small user seed increment.
      config.seed = a.seed + 1000003ull * static_cast<std::uint64_t>(k);
      const HyperParams hyper;
      const FitResult fit = run_chain(B, config, hyper);
      save_fit(fit, fit_dir(k));
      write_dated_regime_summary(fit, tensor, fit_dir(k));
      const std::vector<std::string> fit_argv = {
          "fit",           "--input",  a.input,
          "--out",         fit_dir(k).string(),
          "--breaks",      std::to_string(k),
          "--dims",        std::to_string(a.dims),
          "--iters",       std::to_string(a.iters),
          "--burnin",      std::to_string(a.burnin),
          "--thin",        std::to_string(a.thin),
          "--seed",        std::to_string(config.seed)};
      write_manifest(fit_dir(k), "fit", fit_argv);
    };
    for (std::size_t i = 0; i < missing.size();) {
      std::vector<std::future<void>> batch;
      for (int j = 0; j < jobs && i < missing.size(); ++j, ++i) {
        batch.push_back(std::async(std::launch::async, run_one, missing[i]));
      }
      for (auto& f : batch) f.get();
    }
  }

  std::vector<ModelScore> scores;
  for (int k = 0; k <= a.kmax; ++k) {
    const FitResult fit = load_fit(fit_dir(k));
    EvidenceOptions ev;
    ev.sweeps = a.evidence_sweeps;
    ev.burnin = a.evidence_burnin;
    ev.seed = a.seed + 900001ull * static_cast<std::uint64_t>(k) + 1;
    scores.push_back(score_model(B, fit, ev));
  }
  const BreakSelection sel = detect_break_number(scores);

  ensure_dir(a.out);
  {
    std::ofstream out(fs::path(a.out) / "selection.csv");
    if (!out) throw IoError("cannot write selection.csv");
    out << "breaks,loglik,waic,log_marginal,avg_loss\n";
    for (const ModelScore& s : scores) {
      out << s.n_breaks << ',' << fmt_double(s.loglik) << ',' << fmt_double(s.waic) << ','
          << fmt_double(s.log_marginal) << ',' << fmt_double(s.avg_loss) << '\n';
    }
  }
  {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (const ModelScore& s : scores) {
      rows.push_back({{"breaks", s.n_breaks},
                      {"loglik", s.loglik},
                      {"waic", s.waic},
                      {"log_marginal", s.log_marginal},
                      {"avg_loss", s.avg_loss}});
    }
    j["scores"] = std::move(rows);
    j["selected_breaks"] = sel.selected_breaks;
    j["kink_candidates"] = sel.kink_candidates;
    j["no_kink_warning"] = sel.no_kink_warning;
    std::ofstream out(fs::path(a.out) / "selection.json");
    if (!out) throw IoError("cannot write selection.json");
    out << j.dump(2) << '\n';
  }
  write_manifest(a.out, "select", argv);

  std::cout << "breaks  waic          log_marginal\n";
  for (const ModelScore& s : scores) {
    std::cout << s.n_breaks << "       " << s.waic << "   " << s.log_marginal << "\n";
  }
  std::cout << "selected breaks (min WAIC): " << sel.selected_breaks << "\n";
  std::cout << "kink candidates:";
  for (int k : sel.kink_candidates) std::cout << ' ' << k;
  if (sel.no_kink_warning) std::cout << "  (no interior peak; best endpoint reported)";
  std::cout << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::string input;
  std::string fit;
  std::string out;
};

int cmd_report(const ReportArgs& a, const std::vector<std::string>& argv) {
  const CooccurrenceTensor tensor = load_tensor(a.input);
  const FitResult fit = load_fit(a.fit);
  if (static_cast<int>(fit.state_probs.rows()) != tensor.t()) {
    throw ValidationError("fit week count does not match the tensor");
  }
  const PosteriorMeanParams pm = posterior_mean_params(fit);
  const int M = static_cast<int>(pm.U.size());
  const int N = tensor.n();
  if (static_cast<int>(pm.U.front().rows()) != N) {
    throw ValidationError("fit node count does not match the tensor");
  }

  ensure_dir(a.out);
  for (int m = 0; m < M; ++m) {
    // Co-occurrence totals over the weeks whose modal regime is m.
    Eigen::MatrixXi total = Eigen::MatrixXi::Zero(N, N);
    for (int t = 0; t < tensor.t(); ++t) {
      if (fit.modal_path[t] == m) total += tensor.Y[t];
    }
    {
      std::ofstream out(fs::path(a.out) / ("edges_regime_" + std::to_string(m + 1) + ".csv"));
      if (!out) throw IoError("cannot write regime edge list");
      out << "source,target,weight\n";
      for (int i = 0; i < N; ++i) {
        for (int j = i + 1; j < N; ++j) {
          if (total(i, j) > 0) {
            out << tensor.figures.names[i] << ',' << tensor.figures.names[j] << ','
                << total(i, j) << '\n';
          }
        }
      }
    }
    {
      std::ofstream out(fs::path(a.out) /
                        ("latent_regime_" + std::to_string(m + 1) + ".csv"));
      if (!out) throw IoError("cannot write latent coordinates");
      out << "figure";
      for (int r = 1; r <= static_cast<int>(pm.U[m].cols()); ++r) out << ",dim_" << r;
      out << '\n';
      for (int i = 0; i < N; ++i) {
        out << tensor.figures.names[i];
        for (int r = 0; r < static_cast<int>(pm.U[m].cols()); ++r) {
          out << ',' << fmt_double(pm.U[m](i, r));
        }
        out << '\n';
      }
    }
  }
  save_centrality_csv(degree_centrality(tensor), tensor, fs::path(a.out) / "degree.csv");
  save_centrality_csv(betweenness_centrality(tensor), tensor,
                      fs::path(a.out) / "betweenness.csv");
  {
    std::ofstream out(fs::path(a.out) / "regimes.csv");
    if (!out) throw IoError("cannot write regimes.csv");
    out << "regime,first_week,last_week,start_date,end_date,sigma2_mean\n";
    int t = 0;
    while (t < tensor.t()) {
      const int m = fit.modal_path[t];
      int last = t;
      while (last + 1 < tensor.t() && fit.modal_path[last + 1] == m) ++last;
      out << m + 1 << ',' << t + 1 << ',' << last + 1 << ','
          << to_iso(tensor.weeks[t].start) << ',' << to_iso(tensor.weeks[last].end) << ','
          << fmt_double(pm.sigma2[m]) << '\n';
      t = last + 1;
    }
  }
  write_manifest(a.out, "report", argv);
  std::cout << "report written to " << a.out << " (" << M << " regime edge lists)\n";
  return kExitOk;
}

struct RerunArgs {
  std::string manifest;
  std::string out;
};

int cmd_rerun(const RerunArgs& a) {
  fs::path path = a.manifest;
  if (fs::is_directory(path)) path /= "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest " + path.string() + ": " + e.what());
  }
  std::vector<std::string> argv;
  try {
    argv = j.at("argv").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest lacks an argv list: " + std::string(e.what()));
  }
  if (argv.empty()) throw ValidationError("manifest argv is empty");
  bool replaced = false;
  for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
    if (argv[i] == "--out") {
      argv[i + 1] = a.out;
      replaced = true;
    }
  }
  if (!replaced) {
    argv.push_back("--out");
    argv.push_back(a.out);
  }
  return run_cli(argv);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"weekly person-network tensors and Bayesian regime-change fits"};
  app.set_version_flag("--version", std::string(NETREGIME_VERSION));
  app.require_subcommand(1);

  BuildTensorArgs ba;
  CLI::App* build = app.add_subcommand(
      "build-tensor", "extract weekly key-figure co-occurrence tensor from a JSONL corpus");
  build->add_option("--input", ba.input, "article JSONL file")->required();
  build->add_option("--out", ba.out, "output tensor directory")->required();
  build->add_option("--window-start", ba.window_start, "first day of the window");
  build->add_option("--window-end", ba.window_end, "last day of the window");
  build->add_option("--keyword", ba.keyword, "article filter keyword");
  build->add_option("--aliases", ba.aliases, "canonical-name alias TSV");
  build->add_option("--surnames", ba.surnames, "surname lexicon file");
  build->add_option("--min-mentions", ba.min_mentions, "total mention threshold");
  build->add_option("--min-week-frac", ba.min_week_frac, "week presence fraction");
  build->add_option("--drop", ba.drop, "comma-separated figures to exclude ('' keeps all)");

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "fit the regime-switching model to a tensor");
  fit->add_option("--input", fa.input, "tensor directory")->required();
  fit->add_option("--out", fa.out, "output fit directory")->required();
  fit->add_option("--breaks", fa.breaks, "number of regime changes");
  fit->add_option("--dims", fa.dims, "latent dimension");
  fit->add_option("--iters", fa.iters, "total sweeps");
  fit->add_option("--burnin", fa.burnin, "discarded sweeps");
  fit->add_option("--thin", fa.thin, "retention interval");
  fit->add_option("--seed", fa.seed, "random seed");

  SelectArgs sa;
  CLI::App* select = app.add_subcommand("select", "score fitted break counts and pick one");
  select->add_option("--input", sa.input, "tensor directory")->required();
  select->add_option("--out", sa.out, "output directory for the score table")->required();
  select->add_option("--fits", sa.fits, "directory holding fit_k<k> fits (default: --out)");
  select->add_option("--kmax", sa.kmax, "largest break count");
  select->add_flag("--run-missing", sa.run_missing, "fit absent candidates in parallel");
  select->add_option("--jobs", sa.jobs, "parallel fit workers (default: hardware)");
  select->add_option("--dims", sa.dims, "latent dimension for new fits");
  select->add_option("--iters", sa.iters, "sweeps for new fits");
  select->add_option("--burnin", sa.burnin, "burn-in for new fits");
  select->add_option("--thin", sa.thin, "thinning for new fits");
  select->add_option("--seed", sa.seed, "base seed; per-candidate streams derive from it");
  select->add_option("--evidence-sweeps", sa.evidence_sweeps,
                     "sweeps per reduced evidence run");
  select->add_option("--evidence-burnin", sa.evidence_burnin,
                     "burn-in per reduced evidence run");

  ReportArgs ra;
  CLI::App* report = app.add_subcommand("report", "emit plot-ready CSV bundles for a fit");
  report->add_option("--input", ra.input, "tensor directory")->required();
  report->add_option("--fit", ra.fit, "fit directory")->required();
  report->add_option("--out", ra.out, "output directory")->required();

  RerunArgs xa;
  CLI::App* rerun = app.add_subcommand("rerun-from-manifest",
                                       "re-execute a recorded run into a new directory");
  rerun->add_option("manifest", xa.manifest, "manifest.json or directory holding one")
      ->required();
  rerun->add_option("--out", xa.out, "new output directory")->required();

  int rc = kExitOk;
  build->callback([&] { rc = cmd_build_tensor(ba, args); });
  fit->callback([&] { rc = cmd_fit(fa, args); });
  select->callback([&] { rc = cmd_select(sa, args); });
  report->callback([&] { rc = cmd_report(ra, args); });
  rerun->callback([&] { rc = cmd_rerun(xa); });

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("netregime");
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return rc;
}

}  // namespace netregime
