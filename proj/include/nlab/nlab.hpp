#pragma once

#include "nlab/common.hpp"
#include "nlab/config.hpp"
#include "nlab/dataset.hpp"
#include "nlab/losses.hpp"
#include "nlab/model.hpp"
#include "nlab/noise.hpp"
#include "nlab/svg.hpp"
#include "nlab/theory.hpp"
