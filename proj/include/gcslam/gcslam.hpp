#pragma once

#include "gcslam/association.hpp"
#include "gcslam/errors.hpp"
#include "gcslam/ground.hpp"
#include "gcslam/kdtree.hpp"
#include "gcslam/pipeline.hpp"
#include "gcslam/plane.hpp"
#include "gcslam/pose_graph.hpp"
#include "gcslam/registration.hpp"
#include "gcslam/scan.hpp"
#include "gcslam/se3.hpp"
#include "gcslam/sim.hpp"
#include "gcslam/sliding_map.hpp"
