/* Convenience umbrella header for the full library. */
#pragma once

#include "pgv/core.hpp"
#include "pgv/diffops.hpp"
#include "pgv/io.hpp"
#include "pgv/seminorm.hpp"
#include "pgv/solver.hpp"
#include "pgv/training.hpp"
