# Test package for aggmin
