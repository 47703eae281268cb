#pragma once

#include "homlab/cell.hpp"
#include "homlab/coefficient.hpp"
#include "homlab/elliptic.hpp"
#include "homlab/fit.hpp"
#include "homlab/grid.hpp"
#include "homlab/norms.hpp"
#include "homlab/operator.hpp"
#include "homlab/random.hpp"
#include "homlab/report.hpp"
#include "homlab/nonlinearity.hpp"
#include "homlab/parallel.hpp"
#include "homlab/sparse.hpp"
#include "homlab/wave.hpp"
#include "homlab/attractor.hpp"
#include "homlab/config.hpp"
#include "homlab/csv.hpp"
#include "homlab/expattract.hpp"
#include "homlab/runner.hpp"
