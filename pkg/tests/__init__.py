"""Test suite for dtnlab package."""
