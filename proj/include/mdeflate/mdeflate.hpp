#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/datasets.hpp"
#include "mdeflate/deflation.hpp"
#include "mdeflate/evaluation.hpp"
#include "mdeflate/graph.hpp"
#include "mdeflate/pipeline.hpp"
#include "mdeflate/solver.hpp"
#include "mdeflate/tangent.hpp"
