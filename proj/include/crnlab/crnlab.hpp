#pragma once

#include "crnlab/analysis.hpp"
#include "crnlab/cli.hpp"
#include "crnlab/config.hpp"
#include "crnlab/equilibria.hpp"
#include "crnlab/errors.hpp"
#include "crnlab/grid.hpp"
#include "crnlab/io.hpp"
#include "crnlab/network.hpp"
#include "crnlab/numeric.hpp"
#include "crnlab/simulate.hpp"
