#pragma once

#include <iosfwd>
#include <string>

#include "gridless/common.hpp"
#include "gridless/covariance_estimator.hpp"
#include "gridless/spectral_core.hpp"

namespace gridless {

/// Ensemble CSV: header "i,x1_re,x1_im,...,xL_re,xL_im", one row per time
/// index i = 0..n-1; unobserved entries are written as "nan,nan".
struct EnsembleData {
  SignalEnsemble z;
  ObservationMask mask;
};

void write_ensemble_csv(std::ostream& os, const SignalEnsemble& z, const ObservationMask& mask);

/// Throws IoError (with a 1-based line number when one applies) on empty
/// input, malformed header, ragged rows or unparsable numbers. A nan in
/// either part marks the entry unobserved. The mask comes back Full,
/// CommonRows or Entrywise according to the nan pattern.
EnsembleData read_ensemble_csv(std::istream& is);

/// Covariance file: a first line "# {json}" with n, m, omega and L, then a
/// CSV block with header "row,c1_re,c1_im,...,cm_re,cm_im" and m rows.
void write_covariance_csv(std::ostream& os, const CovarianceSample& s);

/// Parses the format above. Throws IoError on syntax problems; the result is
/// not validated (call CovarianceSample::validate).
CovarianceSample read_covariance_csv(std::istream& is);

EnsembleData read_ensemble_file(const std::string& path);
CovarianceSample read_covariance_file(const std::string& path);

}  // namespace gridless
