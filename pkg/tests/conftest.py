import numpy as np
import pytest

from exoteleop import config
from exoteleop.calibration import load_calibration
from exoteleop.clock import VirtualClock
from exoteleop.control_loop import LoopConfig, ScriptedEncoderSource
from exoteleop.recorder import record_teleop_session, record_wild_session
from exoteleop.scripted import gather_keyframes, keyframes_to_script, shelf_keyframes
from exoteleop.simulator import DualArmSim


@pytest.fixture(scope="session")
def model():
    return config.load_robot()


@pytest.fixture(scope="session")
def cal():
    return load_calibration(config.default_path("calibration_default.json"))


@pytest.fixture(scope="session")
def gather_cfg():
    return config.load_json("world_gather.json")


@pytest.fixture(scope="session")
def shelf_cfg():
    return config.load_json("world_shelf.json")


@pytest.fixture
def loop_cfg():
    return LoopConfig(control_rate_hz=5.0)


def make_gather_sim(model, gather_cfg, seed=1):
    return DualArmSim(model, gather_cfg, seed=seed)


def scripted_gather_demo(model, cal, gather_cfg, seed, arms=("right", "left"),
                         duration_s=60.0, rate_hz=5.0):
    """Teleoperated scripted demo plus the final sim state."""
    sim = DualArmSim(model, gather_cfg, seed=seed)
    script = keyframes_to_script(gather_keyframes(arms), cal)
    source = ScriptedEncoderSource(script)
    world_meta = dict(gather_cfg)
    world_meta["seed"] = seed
    demo, stats = record_teleop_session(
        source, cal, sim, LoopConfig(control_rate_hz=rate_hz), duration_s,
        model=model, task_id="gather_balls", world=world_meta,
        calibration_ref="default", n_grippers=0, clock=VirtualClock(),
    )
    return demo, sim.snapshot(), stats


def scripted_wild_demo(model, cal, seed=0, arms=("right", "left"),
                       duration_s=60.0, rate_hz=5.0, task_id="gather_balls",
                       n_grippers=0):
    script = keyframes_to_script(gather_keyframes(arms), cal)
    source = ScriptedEncoderSource(script)
    demo, stats = record_wild_session(
        source, cal, LoopConfig(control_rate_hz=rate_hz), duration_s,
        model=model, task_id=task_id, calibration_ref="default",
        n_grippers=n_grippers, clock=VirtualClock(),
    )
    return demo, stats


def scripted_shelf_session(model, cal, shelf_cfg, seed=1, duration_s=120.0):
    sim = DualArmSim(model, shelf_cfg, seed=seed)
    script = keyframes_to_script(shelf_keyframes(), cal)
    source = ScriptedEncoderSource(script)
    world_meta = dict(shelf_cfg)
    world_meta["seed"] = seed
    demo, stats = record_teleop_session(
        source, cal, sim, LoopConfig(control_rate_hz=5.0), duration_s,
        model=model, task_id="curtained_shelf", world=world_meta,
        calibration_ref="default", n_grippers=1, clock=VirtualClock(),
    )
    return demo, sim.snapshot(), stats
