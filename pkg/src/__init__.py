"""VoxelMotion - laboratório de compensação de movimento por voxel flows."""
__version__ = "0.3.0"
