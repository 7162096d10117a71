# Results store package
