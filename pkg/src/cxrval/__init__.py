"""Validate free-text chest X-ray reports against their images."""
