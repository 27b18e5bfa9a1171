#pragma once

#include "covgraph/anderson.hpp"
#include "covgraph/dual_fit.hpp"
#include "covgraph/empirical_likelihood.hpp"
#include "covgraph/error.hpp"
#include "covgraph/fit_result.hpp"
#include "covgraph/gaussian_model.hpp"
#include "covgraph/graph.hpp"
#include "covgraph/icf.hpp"
#include "covgraph/icf_multi.hpp"
#include "covgraph/io.hpp"
#include "covgraph/linalg.hpp"
#include "covgraph/simulation.hpp"
