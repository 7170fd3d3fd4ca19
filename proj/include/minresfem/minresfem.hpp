#pragma once

#include "minresfem/adapt.hpp"
#include "minresfem/analysis.hpp"
#include "minresfem/assembly.hpp"
#include "minresfem/config.hpp"
#include "minresfem/errors.hpp"
#include "minresfem/experiment.hpp"
#include "minresfem/fespace.hpp"
#include "minresfem/mesh.hpp"
#include "minresfem/modal.hpp"
#include "minresfem/parallel.hpp"
#include "minresfem/quadrature.hpp"
#include "minresfem/solve.hpp"
