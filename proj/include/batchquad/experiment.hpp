#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "batchquad/problems.hpp"

namespace batchquad {

enum class Method { kKrigingBeliever, kLocalPenalisation, kMetropolisHastings, kPriorMonteCarlo };

std::string to_string(Method m);
Method parse_method(const std::string& s);
ExperimentKind parse_kind(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kInModel;
  int dimension = 2;
  std::vector<int> batch_sizes{1, 2, 5, 10};
  std::vector<Method> methods{Method::kKrigingBeliever, Method::kLocalPenalisation};
  int budget = 103;
  int runs = 10;
  std::uint64_t seed = 0;
  std::string output_path;
  double min_fraction = kDefaultMinFraction;
  double slope_fraction = kDefaultSlopeFraction;
  int p = kDefaultSoftMinExponent;
  int grid_resolution = kDefaultGridResolution;
  int initial_design = 3;
  // MH burn-in cap per chain; see run_mh_cell.
  int mh_burn_in = 500;
  double mh_proposal_sd = 0.5;
};

// Defaults for one experiment kind: dimension, budget and method list.
ExperimentSpec default_spec(ExperimentKind kind);

void validate(const ExperimentSpec& spec);

struct CsvRow {
  std::string experiment;
  std::string method;
  int batch_size = 0;
  int run = 0;
  int batch_index = 0;
  int n_evaluations = 0;
  double estimate = 0.0;
  double estimate_variance = 0.0;
  double ground_truth = 0.0;
  double abs_error = 0.0;
  double wallclock_ms = 0.0;
};

inline constexpr const char* kCsvHeader =
    "experiment,method,batch_size,run,batch_index,n_evaluations,estimate,estimate_variance,ground_truth,"
    "abs_error,wallclock_ms";

void write_csv(std::ostream& os, const std::vector<CsvRow>& rows);
std::vector<CsvRow> parse_csv(std::istream& is);
// Writes to a temporary file in the same directory, then renames it over `path`.
void write_csv_atomic(const std::string& path, const std::vector<CsvRow>& rows);
// Throws IoError if a file cannot be created next to `path`.
void check_writable(const std::string& path);

// Cumulative evaluation counts at which a method with batch size n reports:
// the initial design, then one record per (possibly truncated) batch.
std::vector<int> evaluation_schedule(int initial_design, int batch_size, int budget);

// Per-cell runners. Rows carry method, batch size, run and the reported estimate.
std::vector<CsvRow> run_bq_cell(const Problem& problem, const ExperimentSpec& spec, Method method,
                                int batch_size, int run);
std::vector<CsvRow> run_prior_mc_cell(const Problem& problem, const ExperimentSpec& spec, int batch_size,
                                      int run);
// batch_size parallel chains sharing the evaluation budget; at each reporting
// point the first min(mh_burn_in, e/2) states of a chain with e evaluations
// are discarded and the harmonic-mean estimator is applied to the rest.
std::vector<CsvRow> run_mh_cell(const Problem& problem, const ExperimentSpec& spec, int batch_size, int run);

// Seed of the problem instance for one run.
std::uint64_t problem_seed(const ExperimentSpec& spec, int run);
Problem make_problem(const ExperimentSpec& spec, int run);

// Runs every (run, method, batch size) cell and returns the rows in that
// order. Writes them to spec.output_path when it is non-empty.
std::vector<CsvRow> run_experiment(const ExperimentSpec& spec);

}  // namespace batchquad
