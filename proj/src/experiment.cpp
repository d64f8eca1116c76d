#include "batchquad/experiment.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace batchquad {

std::string to_string(Method m) {
  switch (m) {
    case Method::kKrigingBeliever:
      return "kb";
    case Method::kLocalPenalisation:
      return "lp";
    case Method::kMetropolisHastings:
      return "mh";
    case Method::kPriorMonteCarlo:
      return "prior-mc";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "kb") return Method::kKrigingBeliever;
  if (s == "lp") return Method::kLocalPenalisation;
  if (s == "mh") return Method::kMetropolisHastings;
  if (s == "prior-mc") return Method::kPriorMonteCarlo;
  throw ArgumentError("unknown method '" + s + "' (expected kb, lp, mh or prior-mc)");
}

ExperimentKind parse_kind(const std::string& s) {
  if (s == "inmodel") return ExperimentKind::kInModel;
  if (s == "mixture") return ExperimentKind::kMixture;
  if (s == "evidence") return ExperimentKind::kEvidence;
  throw ArgumentError("unknown experiment '" + s + "' (expected inmodel, mixture or evidence)");
}

ExperimentSpec default_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ExperimentKind::kInModel:
      spec.dimension = 2;
      spec.budget = 103;
      break;
    case ExperimentKind::kMixture:
      spec.dimension = 4;
      spec.budget = 203;
      break;
    case ExperimentKind::kEvidence:
      spec.dimension = 2;
      spec.budget = 103;
      spec.methods.push_back(Method::kPriorMonteCarlo);
      break;
  }
  return spec;
}

void validate(const ExperimentSpec& spec) {
  require(spec.runs >= 1, "runs must be at least 1");
  require(spec.budget >= 4, "budget must be at least 4");
  require(spec.budget >= spec.initial_design, "budget smaller than the initial design");
  require(!spec.batch_sizes.empty(), "need at least one batch size");
  for (int b : spec.batch_sizes) require(b >= 1, "batch sizes must be at least 1");
  require(!spec.methods.empty(), "need at least one method");
  require(spec.min_fraction >= 0.0 && spec.min_fraction <= 1.0, "min-fraction must lie in [0, 1]");
  require(spec.slope_fraction > 0.0 && spec.slope_fraction <= 1.0, "slope-fraction must lie in (0, 1]");
  require(spec.p < 0 && spec.p % 2 == 0, "p must be a negative even integer");
  require(spec.grid_resolution >= 3, "grid resolution must be at least 3");
  require(spec.kind == ExperimentKind::kMixture || spec.dimension == 2,
          "inmodel and evidence experiments are two-dimensional");
  require(spec.dimension >= 1, "dimension must be at least 1");
  require(spec.mh_burn_in >= 0 && spec.mh_proposal_sd > 0.0, "invalid MH settings");
}

namespace {

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.method << ',' << r.batch_size << ',' << r.run << ',' << r.batch_index << ','
       << r.n_evaluations << ',';
    write_double(os, r.estimate);
    os << ',';
    write_double(os, r.estimate_variance);
    os << ',';
    write_double(os, r.ground_truth);
    os << ',';
    write_double(os, r.abs_error);
    os << ',';
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wallclock_ms);
    os << buf << '\n';
  }
}

namespace {

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    if (!(errno == ERANGE && end == s.c_str() + s.size())) throw ArgumentError("csv: bad number '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s) {
  std::size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw ArgumentError("csv: bad integer '" + s + "'");
  return v;
}

}  // namespace

std::vector<CsvRow> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ArgumentError("csv: missing or unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw ArgumentError("csv: expected 11 fields, got " + std::to_string(f.size()));
    CsvRow r;
    r.experiment = f[0];
    r.method = f[1];
    r.batch_size = parse_int(f[2]);
    r.run = parse_int(f[3]);
    r.batch_index = parse_int(f[4]);
    r.n_evaluations = parse_int(f[5]);
    r.estimate = parse_double(f[6]);
    r.estimate_variance = parse_double(f[7]);
    r.ground_truth = parse_double(f[8]);
    r.abs_error = parse_double(f[9]);
    r.wallclock_ms = parse_double(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string temp_path(const std::string& path) { return path + ".tmp"; }

}  // namespace

void check_writable(const std::string& path) {
  require(!path.empty(), "output path is empty");
  const std::string tmp = temp_path(path);
  {
    std::ofstream probe(tmp, std::ios::trunc);
    if (!probe) throw IoError("cannot write output next to '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::remove(tmp, ec);
}

void write_csv_atomic(const std::string& path, const std::vector<CsvRow>& rows) {
  const std::string tmp = temp_path(path);
  {
    std::ofstream os(tmp, std::ios::trunc | std::ios::binary);
    if (!os) throw IoError("cannot open '" + tmp + "' for writing");
    write_csv(os, rows);
    os.flush();
    if (!os) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::vector<int> evaluation_schedule(int initial_design, int batch_size, int budget) {
  require(batch_size >= 1 && initial_design >= 1 && budget >= initial_design, "evaluation_schedule: bad arguments");
  std::vector<int> out{initial_design};
  while (out.back() < budget) out.push_back(std::min(out.back() + batch_size, budget));
  return out;
}

namespace {

constexpr std::uint64_t kTagProblem = 0x70726f62ULL;
constexpr std::uint64_t kTagCell = 0x63656c6cULL;
constexpr std::uint64_t kTagPriorMc = 0x706d63ULL;
constexpr std::uint64_t kTagMhInit = 0x6d68696eULL;
constexpr std::uint64_t kTagMh = 0x6d6863ULL;

// Common random numbers: KB and LP cells of one (run, batch size) share a seed.
std::uint64_t cell_seed(const ExperimentSpec& spec, int run, int batch_size) {
  return derive_seed(spec.seed, kTagCell, run, batch_size);
}

CsvRow make_row(const Problem& problem, Method method, int batch_size, int run, int index, int evals,
                double estimate, double variance, double ms) {
  CsvRow r;
  r.experiment = to_string(problem.kind);
  r.method = to_string(method);
  r.batch_size = batch_size;
  r.run = run;
  r.batch_index = index;
  r.n_evaluations = evals;
  r.estimate = estimate;
  r.estimate_variance = variance;
  r.ground_truth = problem.truth.value;
  r.abs_error = std::abs(estimate - problem.truth.value);
  r.wallclock_ms = ms;
  return r;
}

double log_of(const Problem& problem, const Point& x) {
  if (problem.log_integrand) return problem.log_integrand(x);
  return std::log(problem.integrand(x));
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::uint64_t problem_seed(const ExperimentSpec& spec, int run) { return derive_seed(spec.seed, kTagProblem, run); }

Problem make_problem(const ExperimentSpec& spec, int run) {
  const std::uint64_t seed = problem_seed(spec, run);
  switch (spec.kind) {
    case ExperimentKind::kInModel:
      return gen_inmodel_problem(seed, spec.grid_resolution);
    case ExperimentKind::kMixture: {
      MixtureOptions opts;
      opts.dim = spec.dimension;
      return gen_mixture_problem(seed, opts);
    }
    case ExperimentKind::kEvidence:
      return gen_evidence_problem(seed, spec.grid_resolution);
  }
  throw ArgumentError("unknown experiment kind");
}

std::vector<CsvRow> run_bq_cell(const Problem& problem, const ExperimentSpec& spec, Method method, int batch_size,
                                int run) {
  require(method == Method::kKrigingBeliever || method == Method::kLocalPenalisation,
          "run_bq_cell: not a batch BQ method");
  BatchConfig cfg;
  cfg.batch_size = batch_size;
  cfg.method = method == Method::kKrigingBeliever ? BatchMethod::kKrigingBeliever : BatchMethod::kLocalPenalisation;
  cfg.budget = spec.budget;
  cfg.min_fraction = spec.min_fraction;
  cfg.slope_fraction = spec.slope_fraction;
  cfg.p = spec.p;
  cfg.seed = cell_seed(spec, run, batch_size);
  cfg.initial_design = spec.initial_design;
  const QuadratureTrace trace = run_batch_bq(problem.integration(), cfg);
  if (trace.aborted) throw NumericalError(to_string(method) + " run " + std::to_string(run) + ": " + trace.diagnostic);
  std::vector<CsvRow> rows;
  for (const auto& rec : trace.records) {
    rows.push_back(make_row(problem, method, batch_size, run, rec.batch_index, rec.n_evaluations,
                            problem.report(rec.estimate), problem.report_variance(rec.estimate, rec.estimate_variance),
                            rec.wallclock_ms));
  }
  return rows;
}

std::vector<CsvRow> run_prior_mc_cell(const Problem& problem, const ExperimentSpec& spec, int batch_size, int run) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(derive_seed(cell_seed(spec, run, batch_size), kTagPriorMc));
  const Points theta = problem.prior.sample(rng, spec.budget);
  const Eigen::VectorXd logs = kernels::map_rows([&](const Point& x) { return log_of(problem, x); }, theta);
  std::vector<CsvRow> rows;
  const auto schedule = evaluation_schedule(spec.initial_design, batch_size, spec.budget);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const int e = schedule[k];
    const Eigen::ArrayXd head = logs.head(e).array();
    const double peak = head.maxCoeff();
    double log_mean = -std::numeric_limits<double>::infinity();
    double rel_var = 0.0;  // var(ell) / (E mean^2)
    if (std::isfinite(peak)) {
      const Eigen::ArrayXd scaled = (head - peak).exp();
      const double mean = scaled.mean();
      log_mean = peak + std::log(mean);
      const Eigen::ArrayXd ratio = scaled / mean;
      rel_var = e > 1 ? (ratio - 1.0).square().sum() / (e - 1.0) / e : 0.0;
    }
    double estimate;
    double variance;
    if (problem.log_scale) {
      estimate = log_mean + problem.log_offset;
      variance = rel_var;
    } else {
      estimate = std::exp(log_mean);
      variance = rel_var * estimate * estimate;
    }
    rows.push_back(make_row(problem, Method::kPriorMonteCarlo, batch_size, run, static_cast<int>(k), e, estimate,
                            variance, elapsed_ms(t0)));
  }
  return rows;
}

std::vector<CsvRow> run_mh_cell(const Problem& problem, const ExperimentSpec& spec, int batch_size, int run) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = cell_seed(spec, run, batch_size);
  const GaussianMeasure& prior = problem.prior;
  const LogDensity log_target = [&](const Point& x) { return log_of(problem, x) + prior.log_density(x); };

  const int chains = batch_size;
  std::mt19937_64 rng(derive_seed(seed, kTagMhInit));
  Points inits(chains, prior.dim());
  for (int c = 0; c < chains; ++c) {
    Point x;
    int tries = 0;
    do {
      x = prior.sample(rng, 1).row(0).transpose();
    } while (!std::isfinite(log_target(x)) && ++tries < 1000);
    inits.row(c) = x.transpose();
  }
  // Chain c owns floor(B/b) evaluations plus one of the remainder, so the
  // pooled total equals the budget exactly.
  std::vector<Chain> result(static_cast<std::size_t>(chains));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < chains; ++c) {
    const int len = spec.budget / chains + (c < spec.budget % chains ? 1 : 0);
    if (len == 0) continue;
    ChainConfig cfg;
    cfg.n_chains = chains;
    cfg.burn_in = 0;
    cfg.samples_per_chain = len;
    cfg.proposal_sd = spec.mh_proposal_sd;
    cfg.seed = derive_seed(seed, kTagMh);
    try {
      result[c] = mh_chain(log_target, inits.row(c).transpose(), cfg, c);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // log ell at every visited state
  std::vector<Eigen::VectorXd> log_ell(result.size());
  for (std::size_t c = 0; c < result.size(); ++c) {
    const Chain& ch = result[c];
    log_ell[c].resize(ch.states.rows());
    for (Eigen::Index i = 0; i < ch.states.rows(); ++i) {
      log_ell[c][i] = ch.state_log_target[i] - prior.log_density(ch.states.row(i).transpose());
    }
  }

  std::vector<CsvRow> rows;
  const auto schedule = evaluation_schedule(spec.initial_design, batch_size, spec.budget);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const int e = schedule[k];
    std::vector<double> kept;
    for (int c = 0; c < chains; ++c) {
      const int ec = e / chains + (c < e % chains ? 1 : 0);
      const int burn = std::min(spec.mh_burn_in, ec / 2);
      for (int i = burn; i < ec; ++i) kept.push_back(log_ell[c][i]);
    }
    const double log_z = log_evidence_harmonic(Eigen::Map<const Eigen::VectorXd>(kept.data(), kept.size()));
    const double estimate = problem.log_scale ? log_z + problem.log_offset : std::exp(log_z);
    rows.push_back(make_row(problem, Method::kMetropolisHastings, batch_size, run, static_cast<int>(k), e, estimate,
                            std::numeric_limits<double>::quiet_NaN(), elapsed_ms(t0)));
  }
  return rows;
}

std::vector<CsvRow> run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  if (!spec.output_path.empty()) check_writable(spec.output_path);

  std::vector<Problem> problems;
  problems.reserve(static_cast<std::size_t>(spec.runs));
  for (int r = 0; r < spec.runs; ++r) problems.push_back(make_problem(spec, r));

  struct Cell {
    int run;
    Method method;
    int batch_size;
  };
  std::vector<Cell> cells;
  for (int r = 0; r < spec.runs; ++r) {
    for (Method m : spec.methods) {
      for (int b : spec.batch_sizes) cells.push_back({r, m, b});
    }
  }
  std::vector<std::vector<CsvRow>> out(cells.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      const Cell& c = cells[i];
      const Problem& problem = problems[static_cast<std::size_t>(c.run)];
      switch (c.method) {
        case Method::kKrigingBeliever:
        case Method::kLocalPenalisation:
          out[i] = run_bq_cell(problem, spec, c.method, c.batch_size, c.run);
          break;
        case Method::kPriorMonteCarlo:
          out[i] = run_prior_mc_cell(problem, spec, c.batch_size, c.run);
          break;
        case Method::kMetropolisHastings:
          out[i] = run_mh_cell(problem, spec, c.batch_size, c.run);
          break;
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CsvRow> rows;
  for (auto& cell_rows : out) rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
  if (!spec.output_path.empty()) write_csv_atomic(spec.output_path, rows);
  return rows;
}

}  // namespace batchquad
