# HTTP routes module
