#pragma once

#include "jointseg/bench.hpp"
#include "jointseg/factor_em.hpp"
#include "jointseg/io.hpp"
#include "jointseg/metrics.hpp"
#include "jointseg/segdp.hpp"
#include "jointseg/selection.hpp"
#include "jointseg/simulate.hpp"
#include "jointseg/types.hpp"
