#pragma once

#include "pvi/cases.hpp"
#include "pvi/diagnostics.hpp"
#include "pvi/error.hpp"
#include "pvi/expression.hpp"
#include "pvi/hmm.hpp"
#include "pvi/mesh.hpp"
#include "pvi/mesh_generators.hpp"
#include "pvi/mesh_io.hpp"
#include "pvi/output.hpp"
#include "pvi/quadrature.hpp"
#include "pvi/study.hpp"
#include "pvi/timeloop.hpp"
#include "pvi/vi_solver.hpp"
