#pragma once

// Umbrella header.

#include "rankda/diagnostics.hpp"
#include "rankda/em.hpp"
#include "rankda/error.hpp"
#include "rankda/estimators.hpp"
#include "rankda/io.hpp"
#include "rankda/linalg.hpp"
#include "rankda/model.hpp"
#include "rankda/oracle.hpp"
#include "rankda/permutation.hpp"
#include "rankda/quadrature.hpp"
#include "rankda/random.hpp"
#include "rankda/samplers.hpp"
#include "rankda/special_functions.hpp"
