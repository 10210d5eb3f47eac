#pragma once

// Umbrella header: pulls in the whole library.

#include "voxhand/binio.hpp"
#include "voxhand/bvh.hpp"
#include "voxhand/capsule.hpp"
#include "voxhand/common.hpp"
#include "voxhand/config.hpp"
#include "voxhand/depth.hpp"
#include "voxhand/eval.hpp"
#include "voxhand/ik.hpp"
#include "voxhand/io.hpp"
#include "voxhand/kinematics.hpp"
#include "voxhand/layers.hpp"
#include "voxhand/nets.hpp"
#include "voxhand/network.hpp"
#include "voxhand/pipeline.hpp"
#include "voxhand/pso.hpp"
#include "voxhand/skeleton.hpp"
#include "voxhand/synth.hpp"
#include "voxhand/tensor.hpp"
#include "voxhand/tsdf.hpp"
#include "voxhand/vecmath.hpp"
