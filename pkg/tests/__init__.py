"""bdarma tests."""
