// SPDX-License-Identifier: MIT
//
// File formats: JSON environment configs, mechanism and loss CSV files
// (17 significant digits, ',' separator, LF line endings, mandatory header)
// and the intervals JSON document.  Every parse failure throws InputError
// naming the offending field or line.
#pragma once

#include "tightmech/loss.hpp"
#include "tightmech/mechanism.hpp"
#include "tightmech/model.hpp"
#include "tightmech/tighten.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace tightmech {

// Shortest round-trip-safe rendering used by every writer ("%.17g").
[[nodiscard]] std::string format_number(double v);

// {"x_lo":…, "x_hi":…, "tau":…, "c_A":{"family":…, "params":…}, "c_P":{…}, "kappa":…}
// Families: "power" {"p", "scale"}, "exp-normalized" {"scale"},
// "user-tabulated" {"nodes", "values"}.  "kappa" and "scale" are optional.
// With `checked`, the assumptions are enforced (InvariantViolation).
[[nodiscard]] Environment parse_environment(const std::string& text, bool checked = false);
[[nodiscard]] Environment load_environment(const std::string& path, bool checked = false);
[[nodiscard]] std::string environment_to_json(const Environment& env);

// Columns y,e_A,e_P,r_A,r_P,r_empty; with `derived`, U,Pi,lambda are appended.
void write_mechanism_csv(std::ostream& os, const Mechanism& mech, const DerivedSchedules* derived = nullptr);
// Reads the six leading columns (extra derived columns are ignored); the
// result has provenance Raw.  `source` names the input in error messages.
[[nodiscard]] Mechanism read_mechanism_csv(std::istream& is, const std::string& source = "<stream>");
[[nodiscard]] Mechanism load_mechanism(const std::string& path);

// Columns y,lambda.
void write_loss_csv(std::ostream& os, const LossFunction& lam);
// Validates against `cls`; class violations are reported as InputError.
[[nodiscard]] LossFunction read_loss_csv(std::istream& is, LossClass cls, double tau,
                                         const std::string& source = "<stream>");
[[nodiscard]] LossFunction load_loss(const std::string& path, LossClass cls, double tau);

// {"I_SL":[a,b], …, "I_SH":[a,b], "ep_one_region":[x_lo,a], "ep_zero_region":[b,x_hi],
//  "knots":{…}}; empty regions are null.
[[nodiscard]] std::string intervals_json(const IntervalPartition& part);

// Whole-file helpers; InputError on IO failure.
[[nodiscard]] std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace tightmech
