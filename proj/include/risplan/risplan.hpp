#pragma once

#include "risplan/arrays.hpp"
#include "risplan/bs_beamforming.hpp"
#include "risplan/channel.hpp"
#include "risplan/core.hpp"
#include "risplan/evaluation.hpp"
#include "risplan/fft.hpp"
#include "risplan/io.hpp"
#include "risplan/optimizer.hpp"
#include "risplan/parallel.hpp"
#include "risplan/pipeline.hpp"
#include "risplan/propagation.hpp"
#include "risplan/radar.hpp"
#include "risplan/regions.hpp"
#include "risplan/ris_beamforming.hpp"
#include "risplan/scene.hpp"
#include "risplan/sensing.hpp"
