#pragma once

// End-to-end orchestration: relax -> solve -> (round, validate) loop.
//
// The rounding loop tries depths d = 1, 2, ... so candidates are visited
// from simplest to most faithful.  It stops at the first exactly validated
// candidate, or fails once the expansion stabilizes on the pre-rounded
// ratio itself (convergence of the expansion guarantees that happens at a
// finite depth).  Failures never produce output: an interpolant is returned
// only together with a passing validation report.
//
// Disjunctive inputs are split pairwise; the combined interpolant is the
// disjunction over left disjuncts of the conjunction over right disjuncts.

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "polyitp/relax.hpp"
#include "polyitp/round.hpp"
#include "polyitp/sdp.hpp"
#include "polyitp/validate.hpp"

namespace polyitp {

enum class FailReason {
  SdpInfeasible,
  SdpStalled,
  StabilizedWithoutValidation,
  DegenerateCandidate,
};

inline const char* fail_reason_name(FailReason r) {
  switch (r) {
    case FailReason::SdpInfeasible: return "sdp-infeasible";
    case FailReason::SdpStalled: return "sdp-stalled";
    case FailReason::StabilizedWithoutValidation: return "stabilized-without-validation";
    case FailReason::DegenerateCandidate: return "degenerate-candidate";
  }
  return "?";
}

struct RunConfig {
  unsigned max_degree = 2;  // certificate degree bound
  unsigned precision = 5;   // decimal places kept before expansion
  enum class ModeChoice { Auto, StrictLeft, StrictRight, Dai };
  ModeChoice mode = ModeChoice::Auto;
  unsigned depth_cap = 0;  // 0: loop until stabilization
  SdpOptions sdp;
  size_t sanity_samples = 0;  // optional post-validation sampling
  uint64_t seed = 1;
  // pluggable numeric backend (the CLI substitutes file interchange here)
  std::function<SdpSolution(const SdpProblem&, const SdpOptions&)> solver;
};

struct Timings {
  double build_s = 0, solve_s = 0, round_validate_s = 0;
};

struct PairRun {
  bool ok = false;
  FailReason reason = FailReason::SdpStalled;
  Mode mode = Mode::StrictLeft;
  unsigned depth = 0;
  SymbolTable table;
  ExactCandidate certificate;  // rescaled, directly validatable
  ValidationReport report;
  Interpolant::Atom atom;
  SolveStatus solver_status = SolveStatus::Stalled;
};

struct Outcome {
  bool ok = false;
  FailReason reason = FailReason::SdpStalled;
  size_t fail_i = 0, fail_j = 0;  // failing disjunct pair of a split run
  Interpolant interpolant;
  std::vector<PairCertificate> certificates;
  std::vector<SymbolTable> tables;
  unsigned max_depth = 0;  // deepest expansion used by any pair
  Timings timings;
};

namespace driver_detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void sampling_sanity(const Sas& left, const Sas& right, const Interpolant::Atom& atom,
                            size_t n, uint64_t seed) {
  Box box;
  for (const auto& v : left.vars) box.ranges[v] = {Rational(-10), Rational(10)};
  for (const auto& v : right.vars) box.ranges[v] = {Rational(-10), Rational(10)};
  Box left_box, right_box;
  for (const auto& v : left.vars) left_box.ranges[v] = box.ranges[v];
  for (const auto& v : right.vars) right_box.ranges[v] = box.ranges[v];
  for (const auto& pt : sample_region(left, left_box, n, seed)) {
    std::map<VarId, Rational> full = pt;
    if (!satisfies(atom, full)) {
      throw std::logic_error("validated interpolant violated by a sampled left point");
    }
  }
  for (const auto& pt : sample_region(right, right_box, n, seed + 1)) {
    std::map<VarId, Rational> full = pt;
    if (satisfies(atom, full)) {
      throw std::logic_error("validated interpolant admits a sampled right point");
    }
  }
}

}  // namespace driver_detail

inline PairRun run_pair(const Sas& T, const Sas& Tp, const RunConfig& cfg,
                        Timings* timings = nullptr) {
  std::vector<Mode> modes;
  switch (cfg.mode) {
    case RunConfig::ModeChoice::Auto:
      modes = {Mode::StrictLeft, Mode::StrictRight};
      break;
    case RunConfig::ModeChoice::StrictLeft: modes = {Mode::StrictLeft}; break;
    case RunConfig::ModeChoice::StrictRight: modes = {Mode::StrictRight}; break;
    case RunConfig::ModeChoice::Dai: modes = {Mode::Dai}; break;
  }
  auto solver = cfg.solver ? cfg.solver
                           : [](const SdpProblem& p, const SdpOptions& o) { return solve(p, o); };

  PairRun run;
  for (Mode mode : modes) {
    run.mode = mode;
    auto [left, right] = systems_for_mode(T, Tp, mode);

    auto t0 = std::chrono::steady_clock::now();
    auto [prob, table] = mode == Mode::Dai ? build_dai(left, right, cfg.max_degree)
                                           : build(left, right, cfg.max_degree, mode);
    if (timings) timings->build_s += driver_detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    SdpSolution sol = solver(prob, cfg.sdp);
    if (timings) timings->solve_s += driver_detail::seconds_since(t0);
    run.solver_status = sol.status;
    if (sol.status == SolveStatus::Infeasible) {
      run.reason = FailReason::SdpInfeasible;
      continue;
    }
    if (sol.status == SolveStatus::Stalled) {
      run.reason = FailReason::SdpStalled;
      continue;
    }

    t0 = std::chrono::steady_clock::now();
    PreRounded pre = pre_round(flatten(table, sol), cfg.precision);
    if (pre.all_zero) {
      run.reason = FailReason::DegenerateCandidate;
      if (timings) timings->round_validate_s += driver_detail::seconds_since(t0);
      continue;
    }
    bool validated = false;
    for (unsigned d = 1;; ++d) {
      RoundedCandidate rc = round_candidate(pre, d);
      ExactCandidate cand = ExactCandidate::from_rounded(rc);
      ValidationReport rep = validate(cand, table);
      if (rep.pass) {
        if (mode == Mode::Dai) cand = cand.scaled(rep.dai_scale);
        Assembled parts = assemble(cand.values, table);
        run.ok = true;
        run.depth = d;
        run.table = table;
        run.certificate = cand;
        run.report = rep;
        run.atom = parts.interpolant;
        validated = true;
        break;
      }
      if (rc.stabilized || (cfg.depth_cap > 0 && d >= cfg.depth_cap)) {
        run.reason = FailReason::StabilizedWithoutValidation;
        break;
      }
    }
    if (timings) timings->round_validate_s += driver_detail::seconds_since(t0);
    if (validated) {
      if (cfg.sanity_samples > 0) {
        driver_detail::sampling_sanity(left, right, run.atom, cfg.sanity_samples, cfg.seed);
      }
      return run;
    }
  }
  run.ok = false;
  return run;
}

inline Outcome run_formula(const SasFormula& T, const SasFormula& Tp, const RunConfig& cfg) {
  Outcome out;
  out.interpolant.dnf.assign(T.disjuncts.size(), {});
  for (size_t i = 0; i < T.disjuncts.size(); ++i) {
    for (size_t j = 0; j < Tp.disjuncts.size(); ++j) {
      PairRun run = run_pair(T.disjuncts[i], Tp.disjuncts[j], cfg, &out.timings);
      if (!run.ok) {
        out.ok = false;
        out.reason = run.reason;
        out.fail_i = i;
        out.fail_j = j;
        return out;
      }
      out.interpolant.dnf[i].push_back(run.atom);
      PairCertificate cert;
      cert.i = i;
      cert.j = j;
      cert.mode = run.mode;
      cert.degree_bound = cfg.max_degree;
      cert.depth = run.depth;
      cert.candidate = run.certificate;
      out.certificates.push_back(std::move(cert));
      out.tables.push_back(std::move(run.table));
      out.max_depth = std::max(out.max_depth, run.depth);
    }
  }
  out.ok = true;
  return out;
}

}  // namespace polyitp
