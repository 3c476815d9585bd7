#pragma once

// Umbrella header: optimal council voting weights under collective bias
// models, both asymptotically (closed forms) and at finite population sizes
// (exact conditional-independence sums or seeded Monte Carlo), plus the
// non-negativity analysis of the constant weight term.

#include "cbm/asymptotics.hpp"
#include "cbm/binomial.hpp"
#include "cbm/errors.hpp"
#include "cbm/finite.hpp"
#include "cbm/kernel.hpp"
#include "cbm/linalg.hpp"
#include "cbm/measure.hpp"
#include "cbm/model.hpp"
#include "cbm/nonneg.hpp"
#include "cbm/quadrature.hpp"
#include "cbm/rng.hpp"
