#pragma once

#include "eval/descriptors.hpp"
#include "eval/fid.hpp"
#include "eval/mmd.hpp"
#include "eval/orbits.hpp"
#include "eval/planarity.hpp"
#include "eval/report.hpp"
#include "eval/vun.hpp"
#include "eval/wl.hpp"
