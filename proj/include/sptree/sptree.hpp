#pragma once

#include "numerics.hpp"
#include "rng.hpp"
#include "levy_core.hpp"
#include "path_sim.hpp"
#include "parallel.hpp"
#include "genealogy.hpp"
#include "kernels.hpp"
#include "limit_process.hpp"
#include "verify.hpp"
#include "io.hpp"
#include "acceptance.hpp"
