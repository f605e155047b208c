#pragma once

// Umbrella header.

#include "rgdm/checkpoint.hpp"
#include "rgdm/config.hpp"
#include "rgdm/data.hpp"
#include "rgdm/diffusion.hpp"
#include "rgdm/error.hpp"
#include "rgdm/metrics.hpp"
#include "rgdm/net.hpp"
#include "rgdm/optimizer.hpp"
#include "rgdm/parallel.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/reward.hpp"
#include "rgdm/rng.hpp"
#include "rgdm/schedule.hpp"
#include "rgdm/train.hpp"
