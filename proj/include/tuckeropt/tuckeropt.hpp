#pragma once

#include "tuckeropt/error.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/contract.hpp"
#include "tuckeropt/tucker.hpp"
#include "tuckeropt/tangent.hpp"
#include "tuckeropt/geometry.hpp"
#include "tuckeropt/objective.hpp"
#include "tuckeropt/completion.hpp"
#include "tuckeropt/solvers.hpp"
#include "tuckeropt/io.hpp"
#include "tuckeropt/report.hpp"
#include "tuckeropt/oracles.hpp"
#include "tuckeropt/checks.hpp"
